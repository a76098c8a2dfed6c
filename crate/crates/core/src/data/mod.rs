//! Clickstream ingestion, session assembly and weekly partitioning.

mod csv_io;
mod synth;

use std::collections::{HashMap, HashSet};
use std::path::PathBuf;

use chrono::{DateTime, Duration, Utc};
use thiserror::Error;

use crate::vocab::Token;

pub use csv_io::{
    format_timestamp, load_buys, load_clicks, parse_timestamp, write_buys, write_clicks, Loaded, MalformedLine,
    MALFORMED_LIMIT,
};
pub use synth::{synth_generate, SyntheticConfig};

#[derive(Debug, Error)]
pub enum DataError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
    #[error("{path}: {bad} of {total} lines malformed (limit 1%); first at line {first_line}: {first_reason}")]
    TooManyMalformed {
        path: PathBuf,
        bad: usize,
        total: usize,
        first_line: u64,
        first_reason: String,
    },
    #[error("no sessions to partition")]
    NoSessions,
    #[error("invalid synthetic config: {0}")]
    InvalidConfig(String),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ClickEvent {
    pub session_id: String,
    pub timestamp: DateTime<Utc>,
    pub item: Token,
    pub category: Option<String>,
}

/// One session's items in time order, with its purchase label.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Session {
    pub session_id: String,
    pub items: Vec<Token>,
    /// Category of each item as logged, parallel to `items`.
    pub categories: Vec<Option<String>>,
    pub timestamps: Vec<DateTime<Utc>>,
    pub label: bool,
}

impl Session {
    /// Instant of the first click.
    pub fn start(&self) -> DateTime<Utc> {
        self.timestamps[0]
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }
}

/// One 7-day half-open window `[start, end)` of sessions.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct WeekSegment {
    pub index: usize,
    pub start: DateTime<Utc>,
    pub end: DateTime<Utc>,
    pub sessions: Vec<Session>,
    /// The final window, cut short because the data ends inside it.
    pub partial: bool,
}

impl WeekSegment {
    /// Items in session order, repeats included.
    pub fn items(&self) -> impl Iterator<Item = &Token> + '_ {
        self.sessions.iter().flat_map(|s| s.items.iter())
    }

    /// Item → category as last logged in this week.
    pub fn categories(&self) -> HashMap<String, String> {
        let mut out = HashMap::new();
        for s in &self.sessions {
            for (item, cat) in s.items.iter().zip(&s.categories) {
                if let Some(c) = cat {
                    out.insert(item.as_str().to_owned(), c.clone());
                }
            }
        }
        out
    }

    pub fn positive_rate(&self) -> f64 {
        if self.sessions.is_empty() {
            return 0.0;
        }
        self.sessions.iter().filter(|s| s.label).count() as f64 / self.sessions.len() as f64
    }
}

/// Result of [`assemble_sessions`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Assembled {
    pub sessions: Vec<Session>,
    /// Buy session ids with no clicks; ignored.
    pub orphan_buys: usize,
}

/// Groups clicks into sessions, each sorted by timestamp (stable), labeled 1
/// when the session id appears among the buys. Sessions are ordered by their
/// first click, ties by first appearance in `clicks`.
pub fn assemble_sessions(clicks: &[ClickEvent], buy_sessions: &HashSet<String>) -> Assembled {
    let mut slot: HashMap<&str, usize> = HashMap::new();
    let mut groups: Vec<Vec<&ClickEvent>> = Vec::new();
    for c in clicks {
        let i = *slot.entry(c.session_id.as_str()).or_insert_with(|| {
            groups.push(Vec::new());
            groups.len() - 1
        });
        groups[i].push(c);
    }
    let mut sessions: Vec<Session> = groups
        .into_iter()
        .map(|mut events| {
            events.sort_by_key(|e| e.timestamp);
            let session_id = events[0].session_id.clone();
            Session {
                label: buy_sessions.contains(&session_id),
                session_id,
                items: events.iter().map(|e| e.item.clone()).collect(),
                categories: events.iter().map(|e| e.category.clone()).collect(),
                timestamps: events.iter().map(|e| e.timestamp).collect(),
            }
        })
        .collect();
    sessions.sort_by_key(Session::start);
    let orphan_buys = buy_sessions.iter().filter(|b| !slot.contains_key(b.as_str())).count();
    if orphan_buys > 0 {
        log::warn!("{orphan_buys} buy sessions have no clicks and are ignored");
    }
    Assembled { sessions, orphan_buys }
}

pub fn week() -> Duration {
    Duration::days(7)
}

/// Splits sessions into consecutive 7-day windows anchored at the earliest
/// first click. Each session goes to the window holding its first click.
/// Empty windows in between are kept so indices stay contiguous.
pub fn partition_weeks(sessions: Vec<Session>) -> Result<Vec<WeekSegment>, DataError> {
    let anchor = sessions.iter().map(Session::start).min().ok_or(DataError::NoSessions)?;
    let last = sessions
        .iter()
        .flat_map(|s| s.timestamps.iter().copied())
        .max()
        .expect("non-empty");
    let week_ms = week().num_milliseconds();
    let index_of = |t: DateTime<Utc>| ((t - anchor).num_milliseconds() / week_ms) as usize;
    let count = sessions.iter().map(|s| index_of(s.start())).max().expect("non-empty") + 1;

    let mut segments: Vec<WeekSegment> = (0..count)
        .map(|i| WeekSegment {
            index: i,
            start: anchor + week() * i as i32,
            end: anchor + week() * (i as i32 + 1),
            sessions: Vec::new(),
            partial: false,
        })
        .collect();
    for s in sessions {
        let i = index_of(s.start());
        segments[i].sessions.push(s);
    }
    let tail = segments.last_mut().expect("at least one segment");
    let data_end = last + Duration::milliseconds(1);
    if data_end < tail.end {
        tail.end = data_end;
        tail.partial = true;
    }
    Ok(segments)
}

/// Figure-style weekly new-item counts of partitioned data.
pub fn segment_new_items(segments: &[WeekSegment]) -> Vec<usize> {
    crate::metrics::new_items_per_week(segments.iter().map(|s| s.items().map(Token::as_str)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ts(s: &str) -> DateTime<Utc> {
        parse_timestamp(s).unwrap()
    }

    fn click(session: &str, t: &str, item: &str) -> ClickEvent {
        ClickEvent {
            session_id: session.into(),
            timestamp: ts(t),
            item: Token::new(item).unwrap(),
            category: None,
        }
    }

    fn one_click_session(id: &str, t: &str) -> Session {
        assemble_sessions(&[click(id, t, "x")], &HashSet::new())
            .sessions
            .remove(0)
    }

    #[test]
    fn assemble_labels_and_sorts() {
        let clicks = [
            click("1", "2014-04-07T10:00:05.000Z", "b"),
            click("2", "2014-04-07T09:00:00.000Z", "z"),
            click("1", "2014-04-07T10:00:01.000Z", "a"),
            click("2", "2014-04-07T09:00:01.000Z", "y"),
        ];
        let buys: HashSet<String> = ["1".to_string(), "99".to_string()].into();
        let out = assemble_sessions(&clicks, &buys);
        assert_eq!(out.orphan_buys, 1);
        assert_eq!(out.sessions.len(), 2);
        let s2 = &out.sessions[0];
        assert_eq!((s2.session_id.as_str(), s2.label), ("2", false));
        assert_eq!(s2.items.iter().map(Token::as_str).collect::<Vec<_>>(), ["z", "y"]);
        let s1 = &out.sessions[1];
        assert!(s1.label);
        assert_eq!(s1.items.iter().map(Token::as_str).collect::<Vec<_>>(), ["a", "b"]);
    }

    #[test]
    fn assemble_is_stable_on_equal_timestamps() {
        let t = "2014-04-07T10:00:00.000Z";
        let out = assemble_sessions(
            &[click("1", t, "p"), click("1", t, "q"), click("1", t, "r")],
            &HashSet::new(),
        );
        assert_eq!(
            out.sessions[0].items.iter().map(Token::as_str).collect::<Vec<_>>(),
            ["p", "q", "r"]
        );
    }

    #[test]
    fn partition_single_week() {
        let s = vec![
            one_click_session("1", "2014-04-01T00:00:00.000Z"),
            one_click_session("2", "2014-04-07T23:59:59.999Z"),
        ];
        let p = partition_weeks(s).unwrap();
        assert_eq!(p.len(), 1);
        assert_eq!(p[0].sessions.len(), 2);
    }

    #[test]
    fn partition_day_zero_and_seven_and_a_half() {
        let s = vec![
            one_click_session("1", "2014-04-01T00:00:00.000Z"),
            one_click_session("2", "2014-04-08T12:00:00.000Z"),
        ];
        let p = partition_weeks(s).unwrap();
        assert_eq!(p.len(), 2);
        assert_eq!(p[0].end, ts("2014-04-08T00:00:00.000Z"));
        assert_eq!(p[1].start, p[0].end);
        assert_eq!(p[1].sessions[0].session_id, "2");
        assert!(p[1].partial);
    }

    #[test]
    fn boundary_instant_goes_to_later_window() {
        let s = vec![
            one_click_session("1", "2014-04-01T00:00:00.000Z"),
            one_click_session("2", "2014-04-08T00:00:00.000Z"),
        ];
        let p = partition_weeks(s).unwrap();
        assert_eq!(p[0].sessions.len(), 1);
        assert_eq!(p[1].sessions[0].session_id, "2");
    }

    #[test]
    fn partition_keeps_empty_middle_weeks() {
        let s = vec![
            one_click_session("1", "2014-04-01T00:00:00.000Z"),
            one_click_session("2", "2014-04-20T00:00:00.000Z"),
        ];
        let p = partition_weeks(s).unwrap();
        assert_eq!(p.len(), 3);
        assert!(p[1].sessions.is_empty());
        assert!(matches!(partition_weeks(Vec::new()), Err(DataError::NoSessions)));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn partition_is_a_bijection(offsets in prop::collection::vec(0i64..60 * 86_400_000, 1..60)) {
                let base = ts("2014-04-01T00:00:00.000Z");
                let sessions: Vec<Session> = offsets
                    .iter()
                    .enumerate()
                    .map(|(i, &ms)| {
                        let t = format_timestamp(base + Duration::milliseconds(ms));
                        one_click_session(&i.to_string(), &t)
                    })
                    .collect();
                let p = partition_weeks(sessions.clone()).unwrap();
                let mut ids: Vec<String> = p.iter().flat_map(|w| w.sessions.iter().map(|s| s.session_id.clone())).collect();
                ids.sort();
                let mut expect: Vec<String> = sessions.iter().map(|s| s.session_id.clone()).collect();
                expect.sort();
                prop_assert_eq!(ids, expect);
                for pair in p.windows(2) {
                    prop_assert_eq!(pair[0].end, pair[1].start);
                    prop_assert_eq!(pair[0].end - pair[0].start, week());
                }
                for w in &p {
                    for s in &w.sessions {
                        prop_assert!(w.start <= s.start() && s.start() < w.start + week());
                    }
                }
            }
        }
    }
}
