use std::io::{Read, Write};
use std::process::{Command, Stdio};
use std::time::{Duration, Instant};

use super::{parse_solver_output, write_dimacs, Cnf, Lit, SatError, SolveResult};

/// Runs a user-supplied solver command on a DIMACS file. The command is
/// passed to `sh -c`; `{}` is replaced by the file path, or the path is
/// appended when there is no placeholder.
#[derive(Clone, Debug)]
pub struct ExternalSolver {
    pub command: String,
    pub timeout: Option<Duration>,
}

impl ExternalSolver {
    pub fn new(command: impl Into<String>) -> ExternalSolver {
        ExternalSolver { command: command.into(), timeout: None }
    }

    fn err(&self, msg: impl Into<String>) -> SatError {
        SatError::External { cmd: self.command.clone(), msg: msg.into() }
    }

    pub fn solve(&self, cnf: &Cnf, assumptions: &[Lit]) -> Result<(SolveResult, Vec<bool>), SatError> {
        let mut file = tempfile::Builder::new().suffix(".cnf").tempfile()?;
        {
            let mut w = std::io::BufWriter::new(file.as_file_mut());
            write_dimacs(cnf, assumptions, &mut w)?;
            w.flush()?;
        }
        let path = file.path().display().to_string();
        let line = if self.command.contains("{}") {
            self.command.replace("{}", &path)
        } else {
            format!("{} {}", self.command, path)
        };
        let mut child = Command::new("sh")
            .arg("-c")
            .arg(&line)
            .stdin(Stdio::null())
            .stdout(Stdio::piped())
            .stderr(Stdio::null())
            .spawn()
            .map_err(|e| self.err(format!("spawn failed: {e}")))?;

        let mut stdout = child.stdout.take().expect("piped");
        let reader = std::thread::spawn(move || {
            let mut s = String::new();
            let _ = stdout.read_to_string(&mut s);
            s
        });
        let deadline = self.timeout.map(|t| Instant::now() + t);
        loop {
            if child.try_wait()?.is_some() {
                break;
            }
            if deadline.is_some_and(|d| Instant::now() >= d) {
                let _ = child.kill();
                let _ = child.wait();
                return Ok((SolveResult::Unknown, Vec::new()));
            }
            std::thread::sleep(Duration::from_millis(5));
        }
        let text = reader.join().map_err(|_| self.err("output reader panicked"))?;
        let nvars = assumptions.iter().map(|l| l.var().0 + 1).max().unwrap_or(0).max(cnf.num_vars());
        parse_solver_output(&text, nvars).map_err(|e| self.err(e.to_string()))
    }
}
