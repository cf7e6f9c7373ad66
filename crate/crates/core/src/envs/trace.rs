//! JSON-lines trace files: a header line followed by one sample per line.
//!
//! ```text
//! {"format":"marlx-trace","version":1,"domain":"sr3"}
//! {"episode":0,"step":0,"state":[...],"action":["move","wait","move"],"next":[...]}
//! ```

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::domain::{ConcreteAgentState, Domain, JointAction};
use crate::error::{Error, Result};

const FORMAT: &str = "marlx-trace";
const VERSION: u32 = 1;

/// One sampled step `(x, a, x')`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TraceSample {
    pub episode: u64,
    pub step: u64,
    pub state: Vec<ConcreteAgentState>,
    pub action: JointAction,
    pub next: Vec<ConcreteAgentState>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TraceHeader {
    pub format: String,
    pub version: u32,
    pub domain: String,
}

#[derive(Serialize)]
struct RecordRef<'a> {
    episode: u64,
    step: u64,
    state: &'a [ConcreteAgentState],
    action: Vec<&'a str>,
    next: &'a [ConcreteAgentState],
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct Record {
    episode: u64,
    step: u64,
    state: Vec<ConcreteAgentState>,
    action: Vec<String>,
    next: Vec<ConcreteAgentState>,
}

pub struct TraceWriter<'d, W: Write> {
    out: W,
    domain: &'d Domain,
    written: u64,
}

impl<'d, W: Write> TraceWriter<'d, W> {
    pub fn new(mut out: W, domain: &'d Domain) -> Result<Self> {
        let header = TraceHeader {
            format: FORMAT.into(),
            version: VERSION,
            domain: domain.id.clone(),
        };
        serde_json::to_writer(&mut out, &header).map_err(std::io::Error::from)?;
        out.write_all(b"\n")?;
        Ok(TraceWriter { out, domain, written: 0 })
    }

    pub fn write(&mut self, sample: &TraceSample) -> Result<()> {
        self.domain.check_joint_action(&sample.action)?;
        let record = RecordRef {
            episode: sample.episode,
            step: sample.step,
            state: &sample.state,
            action: self.domain.action_names(&sample.action),
            next: &sample.next,
        };
        serde_json::to_writer(&mut self.out, &record).map_err(std::io::Error::from)?;
        self.out.write_all(b"\n")?;
        self.written += 1;
        Ok(())
    }

    /// Flushes and returns the number of samples written.
    pub fn finish(mut self) -> Result<u64> {
        self.out.flush()?;
        Ok(self.written)
    }
}

pub struct TraceReader<R: BufRead> {
    lines: std::io::Lines<R>,
    header: TraceHeader,
    line_no: usize,
}

impl TraceReader<BufReader<File>> {
    pub fn open(path: impl AsRef<Path>) -> Result<Self> {
        Self::new(BufReader::new(File::open(path)?))
    }
}

impl<R: BufRead> TraceReader<R> {
    pub fn new(input: R) -> Result<Self> {
        let mut lines = input.lines();
        let first = lines
            .next()
            .transpose()?
            .ok_or_else(|| Error::format("trace file", "empty file"))?;
        let header: TraceHeader =
            serde_json::from_str(&first).map_err(|e| Error::format("trace header", e.to_string()))?;
        if header.format != FORMAT {
            return Err(Error::format("trace header", format!("format `{}`", header.format)));
        }
        if header.version != VERSION {
            return Err(Error::VersionMismatch(format!(
                "trace version {}, expected {VERSION}",
                header.version
            )));
        }
        Ok(TraceReader {
            lines,
            header,
            line_no: 1,
        })
    }

    pub fn header(&self) -> &TraceHeader {
        &self.header
    }

    /// Next sample, with action names resolved against `domain`.
    pub fn next_sample(&mut self, domain: &Domain) -> Option<Result<TraceSample>> {
        loop {
            let line = match self.lines.next()? {
                Ok(l) => l,
                Err(e) => return Some(Err(e.into())),
            };
            self.line_no += 1;
            if line.trim().is_empty() {
                continue;
            }
            return Some(self.parse(&line, domain));
        }
    }

    fn parse(&self, line: &str, domain: &Domain) -> Result<TraceSample> {
        let at = |e: String| Error::format("trace record", format!("line {}: {e}", self.line_no));
        let r: Record = serde_json::from_str(line).map_err(|e| at(e.to_string()))?;
        let n = domain.n_agents();
        if r.state.len() != n || r.next.len() != n {
            return Err(at(format!("expected {n} agent states")));
        }
        let action = domain.joint_action(&r.action).map_err(|e| at(e.to_string()))?;
        Ok(TraceSample {
            episode: r.episode,
            step: r.step,
            state: r.state,
            action,
            next: r.next,
        })
    }
}

pub fn write_trace(path: impl AsRef<Path>, domain: &Domain, samples: impl IntoIterator<Item = TraceSample>) -> Result<u64> {
    let mut w = TraceWriter::new(BufWriter::new(File::create(path)?), domain)?;
    for s in samples {
        w.write(&s)?;
    }
    w.finish()
}

/// Reads a whole trace, checking that it was written for `domain` and that
/// each episode's steps count up from 0 with chained states.
pub fn read_trace(path: impl AsRef<Path>, domain: &Domain) -> Result<Vec<TraceSample>> {
    let mut reader = TraceReader::open(path)?;
    if reader.header().domain != domain.id {
        return Err(Error::SchemaMismatch(format!(
            "trace was recorded for domain `{}`, not `{}`",
            reader.header().domain,
            domain.id
        )));
    }
    let mut out: Vec<TraceSample> = Vec::new();
    while let Some(s) = reader.next_sample(domain) {
        let s = s?;
        match out.last() {
            Some(p) if p.episode == s.episode => {
                if s.step != p.step + 1 || s.state != p.next {
                    return Err(Error::format(
                        "trace",
                        format!("episode {} breaks at step {}", s.episode, s.step),
                    ));
                }
            }
            _ if s.step != 0 => {
                return Err(Error::format(
                    "trace",
                    format!("episode {} starts at step {}", s.episode, s.step),
                ))
            }
            _ => {}
        }
        out.push(s);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envs::{simulate, sr_domain, ScriptedPolicy};

    #[test]
    fn round_trip() {
        let d = sr_domain(3).unwrap();
        let samples: Vec<_> = simulate("sr3", &ScriptedPolicy::default(), 50, 2).unwrap().collect();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.jsonl");
        assert_eq!(write_trace(&path, &d, samples.clone()).unwrap(), samples.len() as u64);
        assert_eq!(read_trace(&path, &d).unwrap(), samples);
        assert!(read_trace(&path, &sr_domain(4).unwrap()).is_err());
    }

    #[test]
    fn rejects_bad_input() {
        let d = sr_domain(3).unwrap();
        let bad_version = b"{\"format\":\"marlx-trace\",\"version\":2,\"domain\":\"sr3\"}\n";
        assert!(matches!(TraceReader::new(&bad_version[..]), Err(Error::VersionMismatch(_))));
        let extra = "{\"format\":\"marlx-trace\",\"version\":1,\"domain\":\"sr3\"}\n\
                     {\"episode\":0,\"step\":0,\"state\":[],\"action\":[],\"next\":[],\"x\":1}\n";
        let mut r = TraceReader::new(extra.as_bytes()).unwrap();
        assert!(r.next_sample(&d).unwrap().is_err());
        assert!(TraceReader::new(&b""[..]).is_err());
    }
}
