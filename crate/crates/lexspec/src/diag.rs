//! `key=value` diagnostic lines on standard error.

use std::fmt::Write as _;
use std::sync::atomic::{AtomicBool, Ordering};

static QUIET: AtomicBool = AtomicBool::new(false);

pub fn set_quiet(quiet: bool) {
    QUIET.store(quiet, Ordering::Relaxed);
}

/// Formats `event=<name> k1=v1 k2=v2`. Values containing whitespace are
/// quoted.
pub fn format_line(event: &str, fields: &[(&str, String)]) -> String {
    let mut line = format!("event={event}");
    for (k, v) in fields {
        if v.is_empty() || v.contains(char::is_whitespace) {
            write!(line, " {k}={v:?}").unwrap();
        } else {
            write!(line, " {k}={v}").unwrap();
        }
    }
    line
}

pub fn emit(event: &str, fields: &[(&str, String)]) {
    if !QUIET.load(Ordering::Relaxed) {
        eprintln!("{}", format_line(event, fields));
    }
}

pub fn warn(msg: impl Into<String>) {
    emit("warning", &[("msg", msg.into())]);
}

#[macro_export]
macro_rules! diag {
    ($event:expr $(, $k:ident = $v:expr)* $(,)?) => {
        $crate::diag::emit($event, &[$((stringify!($k), ($v).to_string())),*])
    };
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quoting() {
        let l = format_line("load", &[("path", "a b".into()), ("n", "3".into())]);
        assert_eq!(l, "event=load path=\"a b\" n=3");
    }
}
