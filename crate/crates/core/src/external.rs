//! Models served by a child process over newline-delimited JSON.
//!
//! The child first prints a handshake `{"n":…, "m":…, "probabilities":…}`,
//! then answers each request line `{"id":…, "masked_input":[…]}` with
//! `{"id":…, "scores":[…]}`. Responses may come back in any order.

use std::io::{BufRead, BufReader, Write};
use std::process::{Child, ChildStdin, ChildStdout, Command, Stdio};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{check_input, Concurrency, InputVector, Model, ModelOutput};

/// Requests in flight at once. Responses are short, so this many fit in a
/// pipe buffer and the child never blocks on output while we write.
const WINDOW: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Handshake {
    pub n: usize,
    pub m: usize,
    #[serde(default)]
    pub probabilities: bool,
}

#[derive(Debug, Serialize)]
pub struct Request<'a> {
    pub id: u64,
    pub masked_input: &'a [f64],
}

#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
pub struct Response {
    pub id: u64,
    pub scores: Vec<f64>,
}

pub fn parse_handshake(line: &str) -> Result<Handshake> {
    let h: Handshake = serde_json::from_str(line.trim())
        .map_err(|e| Error::Protocol(format!("bad handshake {:?}: {e}", line.trim())))?;
    if h.n == 0 || h.m == 0 {
        return Err(Error::Protocol("handshake declares an empty model".into()));
    }
    Ok(h)
}

pub fn parse_response(line: &str) -> Result<Response> {
    serde_json::from_str(line.trim()).map_err(|e| Error::Protocol(format!("bad response {:?}: {e}", line.trim())))
}

struct Channel {
    stdin: ChildStdin,
    stdout: BufReader<ChildStdout>,
    next_id: u64,
}

impl Channel {
    fn read_line(&mut self) -> Result<String> {
        let mut line = String::new();
        if self.stdout.read_line(&mut line)? == 0 {
            return Err(Error::Protocol("model process closed its output".into()));
        }
        Ok(line)
    }
}

/// A model evaluated by a child process. Requests are serialized through one
/// channel, so the model declares itself serial; batches are pipelined.
pub struct ExternalModel {
    command: String,
    handshake: Handshake,
    child: Mutex<Child>,
    channel: Mutex<Channel>,
}

impl std::fmt::Debug for ExternalModel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ExternalModel")
            .field("command", &self.command)
            .field("handshake", &self.handshake)
            .finish()
    }
}

impl ExternalModel {
    /// Runs `command` through `sh -c` and reads the handshake.
    pub fn spawn(command: &str) -> Result<Self> {
        let mut child = Command::new("sh")
            .arg("-c")
            .arg(command)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()?;
        let stdin = child.stdin.take().expect("piped stdin");
        let stdout = BufReader::new(child.stdout.take().expect("piped stdout"));
        let mut channel = Channel {
            stdin,
            stdout,
            next_id: 0,
        };
        let handshake = match channel.read_line().and_then(|l| parse_handshake(&l)) {
            Ok(h) => h,
            Err(e) => {
                let _ = child.kill();
                let _ = child.wait();
                return Err(e);
            }
        };
        Ok(ExternalModel {
            command: command.to_string(),
            handshake,
            child: Mutex::new(child),
            channel: Mutex::new(channel),
        })
    }

    pub fn handshake(&self) -> Handshake {
        self.handshake
    }

    fn check_response(&self, r: &Response) -> Result<()> {
        if r.scores.len() != self.handshake.m {
            return Err(Error::Protocol(format!(
                "response {} has {} scores, handshake declared {}",
                r.id,
                r.scores.len(),
                self.handshake.m
            )));
        }
        Ok(())
    }
}

impl Model for ExternalModel {
    fn n_features(&self) -> usize {
        self.handshake.n
    }

    fn n_outputs(&self) -> usize {
        self.handshake.m
    }

    fn probabilities(&self) -> bool {
        self.handshake.probabilities
    }

    fn concurrency(&self) -> Concurrency {
        Concurrency::Serial
    }

    fn evaluate(&self, input: &InputVector) -> Result<ModelOutput> {
        Ok(self.evaluate_batch(std::slice::from_ref(input))?.remove(0))
    }

    fn evaluate_batch(&self, inputs: &[InputVector]) -> Result<Vec<ModelOutput>> {
        for (i, x) in inputs.iter().enumerate() {
            check_input(self, x).map_err(|e| e.at_sample(i))?;
        }
        let mut ch = self.channel.lock().expect("channel lock poisoned");
        let base = ch.next_id;
        ch.next_id += inputs.len() as u64;
        let mut results: Vec<Option<Vec<f64>>> = vec![None; inputs.len()];
        let mut sent = 0;
        let mut received = 0;
        while received < inputs.len() {
            let mut wrote = false;
            while sent < inputs.len() && sent - received < WINDOW {
                let req = Request {
                    id: base + sent as u64,
                    masked_input: &inputs[sent].0,
                };
                let line = serde_json::to_string(&req)?;
                writeln!(ch.stdin, "{line}")?;
                sent += 1;
                wrote = true;
            }
            if wrote {
                ch.stdin.flush()?;
            }
            let line = ch.read_line()?;
            let resp = parse_response(&line)?;
            let slot = resp
                .id
                .checked_sub(base)
                .map(|k| k as usize)
                .filter(|&k| k < sent)
                .ok_or_else(|| Error::Protocol(format!("unexpected response id {}", resp.id)))?;
            self.check_response(&resp).map_err(|e| e.at_sample(slot))?;
            if results[slot].replace(resp.scores).is_some() {
                return Err(Error::Protocol(format!("duplicate response id {}", resp.id)));
            }
            received += 1;
        }
        let probabilities = self.handshake.probabilities;
        results
            .into_iter()
            .enumerate()
            .map(|(i, s)| {
                let s = s.expect("every slot filled");
                if probabilities {
                    ModelOutput::probabilities(s)
                } else {
                    ModelOutput::new(s)
                }
                .map_err(|e| e.at_sample(i))
            })
            .collect()
    }
}

impl Drop for ExternalModel {
    fn drop(&mut self) {
        if let Ok(child) = self.child.get_mut() {
            let _ = child.kill();
            let _ = child.wait();
        }
    }
}

/// Serves `model` over `reader`/`writer` with the same protocol, answering
/// requests in order. Returns when the input ends.
pub fn serve<M: Model + ?Sized, R: BufRead, W: Write>(model: &M, reader: R, mut writer: W) -> Result<()> {
    let hs = Handshake {
        n: model.n_features(),
        m: model.n_outputs(),
        probabilities: model.probabilities(),
    };
    writeln!(writer, "{}", serde_json::to_string(&hs)?)?;
    writer.flush()?;
    #[derive(Deserialize)]
    struct Incoming {
        id: u64,
        masked_input: Vec<f64>,
    }
    for line in reader.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let req: Incoming =
            serde_json::from_str(&line).map_err(|e| Error::Protocol(format!("bad request {line:?}: {e}")))?;
        let out = model.evaluate(&InputVector(req.masked_input))?;
        let resp = Response {
            id: req.id,
            scores: out.0,
        };
        writeln!(writer, "{}", serde_json::to_string(&resp)?)?;
        writer.flush()?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::Conjunction;

    #[test]
    fn handshake_parsing() {
        let h = parse_handshake("{\"n\":3,\"m\":2,\"probabilities\":true}\n").unwrap();
        assert_eq!(h, Handshake { n: 3, m: 2, probabilities: true });
        assert!(parse_handshake("{\"n\":3}").is_err());
        assert!(parse_handshake("{\"n\":0,\"m\":2}").is_err());
        assert!(parse_handshake("hello").is_err());
    }

    #[test]
    fn response_parsing() {
        let r = parse_response("{\"id\":7,\"scores\":[0.25,0.75]}").unwrap();
        assert_eq!(r, Response { id: 7, scores: vec![0.25, 0.75] });
        assert!(matches!(parse_response("{\"id\":1}"), Err(Error::Protocol(_))));
    }

    #[test]
    fn server_round_trip() {
        let model = Conjunction::new(2, vec![0, 1]).unwrap();
        let input = b"{\"id\":0,\"masked_input\":[1,1]}\n{\"id\":1,\"masked_input\":[1,0]}\n";
        let mut out = Vec::new();
        serve(&model, &input[..], &mut out).unwrap();
        let lines: Vec<&str> = std::str::from_utf8(&out).unwrap().lines().collect();
        assert_eq!(parse_handshake(lines[0]).unwrap().m, 2);
        assert_eq!(parse_response(lines[1]).unwrap().scores, vec![0.0, 1.0]);
        assert_eq!(parse_response(lines[2]).unwrap().scores, vec![1.0, 0.0]);
    }

    #[test]
    fn spawn_failure_is_protocol_error() {
        let err = ExternalModel::spawn("echo not-json").unwrap_err();
        assert!(matches!(err, Error::Protocol(_)), "{err}");
    }
}
