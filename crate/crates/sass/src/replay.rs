//! Text rendering of a trace: one ASCII frame per tick plus an event digest.
//!
//! Glyphs: `#` obstacle, `0`-`9` agent (id mod 10), `v` open victim,
//! `X` active adversary, `.` empty. Agents hide victims and adversaries
//! under them.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use sass_core::geom::Cell;
use sass_core::trace::{EventKind, Spawned, Trace};

#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pub tick: u64,
    /// Row 0 is `y = 0`.
    pub rows: Vec<String>,
    /// Event kind name and count for this tick, sorted by name.
    pub digest: BTreeMap<&'static str, usize>,
}

#[derive(Default)]
struct Scene {
    agents: BTreeMap<u32, Cell>,
    victims: BTreeMap<u32, Cell>,
    adversaries: BTreeMap<u32, Cell>,
}

impl Scene {
    fn apply(&mut self, e: &EventKind) {
        match e {
            EventKind::Spawn(Spawned::Agent { id, pos, .. }) => {
                self.agents.insert(*id, *pos);
            }
            EventKind::Spawn(Spawned::Task { id, pos, .. }) => {
                self.victims.insert(*id, *pos);
            }
            EventKind::Spawn(Spawned::Adversary { id, pos }) => {
                self.adversaries.insert(*id, *pos);
            }
            EventKind::Move { agent, to, .. } => {
                self.agents.insert(*agent, *to);
            }
            EventKind::Rescue { task, .. } | EventKind::Expire { task } => {
                self.victims.remove(task);
            }
            EventKind::Encounter { adversary, success: true, .. } => {
                self.adversaries.remove(adversary);
            }
            _ => {}
        }
    }

    fn draw(&self, trace: &Trace) -> Vec<String> {
        let (w, h) = (trace.header.width as usize, trace.header.height as usize);
        let mut g = vec![vec!['.'; w]; h];
        let mut put = |c: &Cell, ch: char| {
            if (0..w as i32).contains(&c.x) && (0..h as i32).contains(&c.y) {
                g[c.y as usize][c.x as usize] = ch;
            }
        };
        for o in &trace.header.obstacles {
            put(o, '#');
        }
        for c in self.adversaries.values() {
            put(c, 'X');
        }
        for c in self.victims.values() {
            put(c, 'v');
        }
        for (id, c) in &self.agents {
            put(c, char::from_digit(id % 10, 10).expect("digit"));
        }
        g.into_iter().map(|r| r.into_iter().collect()).collect()
    }
}

/// State at the end of every tick from 0 through the last event tick.
pub fn frames(trace: &Trace) -> Vec<Frame> {
    let last = trace.events.last().map_or(0, |e| e.tick);
    let mut scene = Scene::default();
    let mut out = Vec::with_capacity(last as usize + 1);
    let mut events = trace.events.iter().peekable();
    for tick in 0..=last {
        let mut digest = BTreeMap::new();
        while let Some(e) = events.next_if(|e| e.tick == tick) {
            scene.apply(&e.event);
            *digest.entry(e.event.name()).or_insert(0) += 1;
        }
        out.push(Frame { tick, rows: scene.draw(trace), digest });
    }
    out
}

pub fn render(trace: &Trace) -> String {
    let h = &trace.header;
    let mut s = String::new();
    let _ = writeln!(s, "{} seed={} mode={} scenario={:016x} version={}", h.format, h.seed, h.mode, h.scenario_hash, h.version);
    for f in frames(trace) {
        let _ = writeln!(s, "tick {}", f.tick);
        for r in &f.rows {
            let _ = writeln!(s, "{r}");
        }
        if !f.digest.is_empty() {
            let parts: Vec<String> = f.digest.iter().map(|(k, n)| format!("{k}x{n}")).collect();
            let _ = writeln!(s, "events: {}", parts.join(" "));
        }
    }
    s
}
