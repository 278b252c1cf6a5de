//! Line-delimited request/response protocol.
//!
//! One response line per request line, `OK ...` or `ERR <reason> [detail]`.
//! Rendered bodies are sent on one line with `\\` and newlines escaped; the length
//! prefix counts the bytes of the unescaped body.

use std::io::{self, BufRead, BufReader, Write};
use std::net::{TcpListener, TcpStream};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex};
use std::thread;

use crate::access::{AccessError, EventType, Kind, Op};
use crate::dsl;
use crate::engine::{Engine, EngineError};
use crate::log::LogError;
use crate::publish::PublishError;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Reply {
    pub line: String,
    pub quit: bool,
}

impl Reply {
    fn ok(s: impl AsRef<str>) -> Self {
        let s = s.as_ref();
        Reply { line: if s.is_empty() { "OK".into() } else { format!("OK {s}") }, quit: false }
    }

    fn err(reason: &str, detail: impl AsRef<str>) -> Self {
        let d = detail.as_ref();
        let line = if d.is_empty() { format!("ERR {reason}") } else { format!("ERR {reason} {}", one_line(d)) };
        Reply { line, quit: false }
    }
}

fn one_line(s: &str) -> String {
    s.replace('\\', "\\\\").replace('\n', "\\n").replace('\r', "\\r")
}

/// Inverse of the body escaping used by `RENDER`.
pub fn unescape_body(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    let mut chars = s.chars();
    while let Some(c) = chars.next() {
        if c != '\\' {
            out.push(c);
            continue;
        }
        match chars.next() {
            Some('n') => out.push('\n'),
            Some('r') => out.push('\r'),
            Some(other) => out.push(other),
            None => out.push('\\'),
        }
    }
    out
}

fn reason(e: &EngineError) -> &'static str {
    match e {
        EngineError::Access(AccessError::UnknownSession(_)) => "unknown-session",
        EngineError::Access(AccessError::UnknownUser(_)) => "unknown-user",
        EngineError::Access(AccessError::AlreadyClosed(_)) => "already-closed",
        EngineError::Access(AccessError::ScriptFailure { .. }) => "script-failure",
        EngineError::Access(_) => "access",
        EngineError::Publish(PublishError::UnknownView(_)) => "unknown-view",
        EngineError::Publish(PublishError::Denied(_)) | EngineError::Denied(_) => "denied",
        EngineError::SessionClosed(_) => "closed-session",
        EngineError::Dsl(_) | EngineError::Load { .. } => "parse",
        EngineError::Log(LogError::Io(_)) => "io",
        _ => "rejected",
    }
}

fn engine_err(e: EngineError) -> Reply {
    Reply::err(reason(&e), e.to_string())
}

fn session_id(s: &str) -> Option<u64> {
    s.parse().ok()
}

/// Handles one request line against the engine.
pub fn handle_line(engine: &mut Engine, line: &str) -> Reply {
    let line = line.trim_end_matches(['\r', '\n']);
    let (verb, rest) = match line.split_once(' ') {
        Some((v, r)) => (v, r.trim()),
        None => (line.trim(), ""),
    };
    let args: Vec<&str> = rest.split_whitespace().collect();
    let parse_err = || Reply::err("parse", "");
    match verb {
        "SESSION-OPEN" if args.len() == 1 => match engine.open_session(args[0]) {
            Ok(s) => {
                let mut out = format!("session={}", s.id);
                if !s.actions.is_empty() {
                    out.push_str(&format!(" actions={}", s.actions.len()));
                }
                if let Some(e) = s.script_error {
                    out.push_str(&format!(" script-error={}", one_line(&e).replace(' ', "_")));
                }
                Reply::ok(out)
            }
            Err(e) => engine_err(e),
        },
        "SESSION-CLOSE" if args.len() == 1 => {
            let Some(id) = session_id(args[0]) else { return parse_err() };
            match engine.close_session(id) {
                Ok(()) => Reply::ok("closed"),
                Err(e) => engine_err(e),
            }
        }
        "AUTH?" if args.len() == 4 => {
            let (Some(id), Ok(kind), Ok(op)) = (session_id(args[0]), args[2].parse::<Kind>(), args[3].parse::<Op>())
            else {
                return parse_err();
            };
            match engine.authorize(id, args[1], kind, op) {
                Ok(d) => Reply::ok(d.to_string()),
                Err(e) => engine_err(e),
            }
        }
        "EVENT" if args.len() >= 2 => {
            let (Ok(event), Some(id)) = (args[0].parse::<EventType>(), session_id(args[1])) else {
                return parse_err();
            };
            let payload = rest.splitn(3, ' ').nth(2).unwrap_or("").trim();
            match engine.dispatch_event(event, id, payload) {
                Ok(actions) => {
                    let steps: Vec<String> = actions.iter().map(|a| a.action.to_string()).collect();
                    if steps.is_empty() {
                        Reply::ok("actions=0")
                    } else {
                        Reply::ok(format!("actions={} {}", steps.len(), one_line(&steps.join("; "))))
                    }
                }
                Err(e) => engine_err(e),
            }
        }
        "RENDER" if args.len() == 2 => {
            let Some(id) = args[1].strip_prefix("session=").and_then(session_id) else { return parse_err() };
            match engine.render(args[0], id) {
                Ok(r) => Reply::ok(format!("{} {}", r.body.len(), one_line(&r.body))),
                Err(e) => engine_err(e),
            }
        }
        "TICK" if args.is_empty() => match engine.apply(dsl::Statement::Tick) {
            Ok(a) => {
                let mut out = format!("tick={} rerendered={}", engine.publisher().ticks(), a.rerendered.len());
                for v in &a.rerendered {
                    out.push(' ');
                    out.push_str(v);
                }
                Reply::ok(out)
            }
            Err(e) => engine_err(e),
        },
        "REFRESH" if args.len() == 1 => match engine.apply(dsl::Statement::Refresh(args[0].into())) {
            Ok(_) => Reply::ok(format!("refreshed {}", args[0])),
            Err(e) => engine_err(e),
        },
        "EXEC" if args.len() >= 3 => {
            let Some(id) = session_id(args[0]) else { return parse_err() };
            let repo = args[1];
            let src = rest.splitn(3, ' ').nth(2).unwrap_or("").trim();
            let stmt = match dsl::parse_statement(src) {
                Ok(s) => s,
                Err(e) => return Reply::err("parse", e.to_string()),
            };
            if let Err(e) = engine.authorize_statement(id, repo, &stmt) {
                return engine_err(e);
            }
            if !matches!(stmt, dsl::Statement::Repository(_)) && engine.repository(repo).is_err() {
                return Reply::err("rejected", format!("unknown repository `{repo}`"));
            }
            match engine.apply_in(repo, stmt) {
                Ok(a) => Reply::ok(format!("position={} rerendered={}", a.position, a.rerendered.len())),
                Err(e) => engine_err(e),
            }
        }
        "VIEWS" if args.len() == 1 => {
            let Some(id) = session_id(args[0]) else { return parse_err() };
            match engine.visible_views(id) {
                Ok(v) => Reply::ok(v.join(" ")),
                Err(e) => engine_err(e),
            }
        }
        "STATS" if args.is_empty() => Reply::ok(engine.stats().to_string()),
        "QUIT" if args.is_empty() => match engine.flush_log() {
            Ok(()) => Reply { line: "OK bye".into(), quit: true },
            Err(e) => Reply { line: engine_err(e).line, quit: true },
        },
        _ => parse_err(),
    }
}

/// Serves one connection. Returns true when the client sent `QUIT`.
pub fn serve_stream<R: BufRead, W: Write>(engine: &Mutex<Engine>, reader: R, mut writer: W) -> io::Result<bool> {
    for line in reader.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let reply = {
            let mut e = engine.lock().unwrap_or_else(|p| p.into_inner());
            handle_line(&mut e, &line)
        };
        writeln!(writer, "{}", reply.line)?;
        writer.flush()?;
        if reply.quit {
            return Ok(true);
        }
    }
    Ok(false)
}

/// Accepts connections until some client sends `QUIT`.
pub fn serve_tcp(engine: Arc<Mutex<Engine>>, listener: TcpListener) -> io::Result<()> {
    let addr = listener.local_addr()?;
    let stop = Arc::new(AtomicBool::new(false));
    let mut workers = Vec::new();
    for stream in listener.incoming() {
        if stop.load(Ordering::SeqCst) {
            break;
        }
        let stream = stream?;
        let (engine, stop) = (engine.clone(), stop.clone());
        workers.push(thread::spawn(move || -> io::Result<()> {
            let reader = BufReader::new(stream.try_clone()?);
            if serve_stream(&engine, reader, &stream)? {
                stop.store(true, Ordering::SeqCst);
                // Wake the accept loop so it observes the stop flag.
                let _ = TcpStream::connect(addr);
            }
            Ok(())
        }));
    }
    for w in workers {
        let _ = w.join();
    }
    Ok(())
}
