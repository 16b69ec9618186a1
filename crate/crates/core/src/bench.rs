//! Square-and-multiply exponentiation schedule as mini-HDL.
//!
//! The control FSM walks the key from bit 0 upwards, spending
//! `cycles_square` cycles on every bit and `cycles_multiply` extra cycles
//! on every 1-bit. The datapath (`r0`, `r1`) is a placeholder mixing
//! function: it follows the schedule exactly but computes nothing
//! cryptographic. `done` is raised during the last work cycle, together
//! with the final `pt` value.

use std::fmt::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum BenchError {
    #[error("parameter {name} = {value} outside {range}")]
    ParamOutOfRange { name: &'static str, value: u32, range: &'static str },
    #[error("key 0 never starts the schedule")]
    ZeroKey,
    #[error("key {key:#x} does not fit {bits} bits")]
    KeyTooWide { key: u64, bits: u32 },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RsaParams {
    pub n: u32,
    pub cycles_square: u32,
    pub cycles_multiply: u32,
    pub setup_cycles: u32,
}

impl RsaParams {
    pub fn new(n: u32) -> RsaParams {
        RsaParams { n, cycles_square: 1, cycles_multiply: 1, setup_cycles: 1 }
    }

    pub fn validate(&self) -> Result<(), BenchError> {
        if !(4..=32).contains(&self.n) {
            return Err(BenchError::ParamOutOfRange { name: "n", value: self.n, range: "4..=32" });
        }
        for (name, value) in [
            ("cycles_square", self.cycles_square),
            ("cycles_multiply", self.cycles_multiply),
            ("setup_cycles", self.setup_cycles),
        ] {
            if !(1..=16).contains(&value) {
                return Err(BenchError::ParamOutOfRange { name, value, range: "1..=16" });
            }
        }
        Ok(())
    }

    pub fn module_name(&self) -> String {
        let mut s = format!("rsa{}", self.n);
        if self.cycles_square != 1 || self.cycles_multiply != 1 {
            let _ = write!(s, "_s{}m{}", self.cycles_square, self.cycles_multiply);
        }
        if self.setup_cycles != 1 {
            let _ = write!(s, "_l{}", self.setup_cycles);
        }
        s
    }

    /// Longest schedule (all key bits set).
    pub fn max_latency(&self) -> u32 {
        self.n * (self.cycles_square + self.cycles_multiply) + self.setup_cycles - 1
    }

    /// Bound written into the generated `@bound` pragma.
    pub fn default_bound(&self) -> u32 {
        self.max_latency() + 6
    }
}

/// Bits needed to hold values `0..=max`.
fn bits_for(max: u32) -> u32 {
    (u32::BITS - max.leading_zeros()).max(1)
}

fn range(w: u32) -> String {
    if w == 1 {
        String::new()
    } else {
        format!("[{}:0] ", w - 1)
    }
}

pub fn generate(p: &RsaParams) -> Result<String, BenchError> {
    p.validate()?;
    let n = p.n;
    let sub_w = bits_for(p.cycles_square.max(p.cycles_multiply) - 1);
    let j_w = bits_for(n - 1);
    let ld_w = bits_for(p.setup_cycles - 1);
    let has_ld = p.setup_cycles > 1;
    let rn = range(n);

    let mut s = String::new();
    let _ = writeln!(s, "// @secret key");
    let _ = writeln!(s, "// @observable pt done");
    let _ = writeln!(s, "// @start start");
    let _ = writeln!(s, "// @done done");
    let _ = writeln!(s, "// @bound {}", p.default_bound());
    let _ = writeln!(
        s,
        "// {n}-bit square-and-multiply schedule: {} cycle(s) per square, {} per multiply, {} setup",
        p.cycles_square, p.cycles_multiply, p.setup_cycles
    );
    let _ = writeln!(s, "module {}(", p.module_name());
    let _ = writeln!(s, "  input clk,\n  input rst,\n  input start,");
    let _ = writeln!(s, "  input {rn}key,\n  input {rn}ct,\n  output {rn}pt,\n  output done\n);");
    let _ = writeln!(s, "  reg busy;\n  reg mul;\n  reg {}sub;\n  reg {}j;", range(sub_w), range(j_w));
    let _ = writeln!(s, "  reg {rn}keyr;\n  reg {rn}r0;\n  reg {rn}r1;");
    if has_ld {
        let _ = writeln!(s, "  reg {}ld;", range(ld_w));
    }
    let _ = writeln!(s, "  wire run;\n  wire kbit;\n  wire sq_last;\n  wire mul_last;\n  wire step_end;");
    let _ = writeln!(s, "  wire {rn}r0n;\n  wire {rn}r1n;");
    s.push('\n');
    if has_ld {
        let _ = writeln!(s, "  assign run = busy & (ld == {ld_w}'h0);");
    } else {
        let _ = writeln!(s, "  assign run = busy;");
    }
    let _ = writeln!(s, "  assign kbit = keyr[0];");
    let _ = writeln!(s, "  assign sq_last = run & ~mul & (sub == {sub_w}'h{:x});", p.cycles_square - 1);
    let _ = writeln!(s, "  assign mul_last = run & mul & (sub == {sub_w}'h{:x});", p.cycles_multiply - 1);
    let _ = writeln!(s, "  assign step_end = (sq_last & ~kbit) | mul_last;");
    let _ = writeln!(s, "  assign done = step_end & (j == {j_w}'h{:x});", n - 1);
    let half = n / 2;
    let _ = writeln!(
        s,
        "  assign r0n = sq_last ? ({{r0[{}:0], r0[{}]}} ^ r1) : (mul_last ? (r0 + r1) : r0);",
        n - 2,
        n - 1
    );
    let _ = writeln!(
        s,
        "  assign r1n = mul_last ? (r1 ^ {{r0n[{}:0], r0n[{}:{}]}}) : r1;",
        half - 1,
        n - 1,
        half
    );
    let _ = writeln!(s, "  assign pt = r0n;");
    s.push('\n');
    let _ = writeln!(s, "  always @(posedge clk) begin");
    let _ = writeln!(s, "    if (rst) begin");
    for r in ["busy", "mul", "sub", "j", "keyr", "r0", "r1"] {
        let _ = writeln!(s, "      {r} <= 0;");
    }
    if has_ld {
        let _ = writeln!(s, "      ld <= 0;");
    }
    let _ = writeln!(s, "    end else if (start) begin");
    let _ = writeln!(s, "      busy <= key != {n}'h0;");
    let _ = writeln!(s, "      mul <= 0;\n      sub <= 0;\n      j <= 0;\n      keyr <= key;");
    let _ = writeln!(s, "      r0 <= ct;\n      r1 <= ct ^ key;");
    if has_ld {
        let _ = writeln!(s, "      ld <= {ld_w}'h{:x};", p.setup_cycles - 1);
    }
    let _ = writeln!(s, "    end else if (busy) begin");
    if has_ld {
        let _ = writeln!(s, "      if (ld != {ld_w}'h0) ld <= ld - 1;");
    }
    let _ = writeln!(s, "      r0 <= r0n;\n      r1 <= r1n;");
    let _ = writeln!(s, "      if (done) busy <= 0;");
    let _ = writeln!(s, "      if (step_end) begin");
    let _ = writeln!(s, "        sub <= 0;\n        mul <= 0;\n        j <= j + 1;");
    let _ = writeln!(s, "        keyr <= {{1'h0, keyr[{}:1]}};", n - 1);
    let _ = writeln!(s, "      end else if (sq_last) begin");
    let _ = writeln!(s, "        sub <= 0;\n        mul <= 1;");
    let _ = writeln!(s, "      end else if (run) begin");
    let _ = writeln!(s, "        sub <= sub + 1;");
    let _ = writeln!(s, "      end");
    let _ = writeln!(s, "    end");
    let _ = writeln!(s, "  end");
    let _ = writeln!(s, "endmodule");
    Ok(s)
}

/// Latency under the start/done convention: every bit costs a square,
/// every 1-bit an extra multiply, plus the setup cycles beyond the start
/// cycle itself.
pub fn expected_latency(p: &RsaParams, key: u64) -> Result<u32, BenchError> {
    p.validate()?;
    if p.n < 64 && key >> p.n != 0 {
        return Err(BenchError::KeyTooWide { key, bits: p.n });
    }
    if key == 0 {
        return Err(BenchError::ZeroKey);
    }
    Ok(p.n * p.cycles_square + key.count_ones() * p.cycles_multiply + p.setup_cycles - 1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hdl::load;
    use crate::sim::{run, Stimulus, Valuation};

    fn latency(src: &str, n: u32, key: u64, bound: u32) -> Option<u32> {
        let d = load(src).unwrap();
        let s = Stimulus::new(
            Valuation::from([("ct".to_string(), 0x5a & ((1 << n) - 1))]),
            Valuation::from([("key".to_string(), key)]),
            bound,
        );
        run(&d, &s).unwrap().latency
    }

    #[test]
    fn eight_bit_examples() {
        let p = RsaParams::new(8);
        let src = generate(&p).unwrap();
        assert_eq!(latency(&src, 8, 0x01, 40), Some(9));
        assert_eq!(latency(&src, 8, 0x80, 40), Some(9));
        assert_eq!(latency(&src, 8, 0xFF, 40), Some(16));
        assert_eq!(latency(&src, 8, 0x0F, 40), Some(12));
        assert_eq!(latency(&src, 8, 0x00, 40), None);
    }

    #[test]
    fn ports_and_pragmas() {
        let src = generate(&RsaParams::new(8)).unwrap();
        let d = load(&src).unwrap();
        let names: Vec<&str> = d.ports.iter().map(|p| p.name.as_str()).collect();
        assert_eq!(names, ["clk", "rst", "start", "key", "ct", "pt", "done"]);
        assert_eq!(d.annot.secret, ["key".to_string()].into());
        assert_eq!(d.annot.observable, ["done".to_string(), "pt".to_string()].into());
    }

    #[test]
    fn formula() {
        let p = RsaParams::new(32);
        assert_eq!(expected_latency(&p, 1).unwrap(), 33);
        assert_eq!(expected_latency(&p, 0xFFFF_FFFF).unwrap(), 64);
        assert_eq!(expected_latency(&p, 0), Err(BenchError::ZeroKey));
        assert!(matches!(expected_latency(&RsaParams::new(8), 0x100), Err(BenchError::KeyTooWide { .. })));
        assert!(generate(&RsaParams::new(3)).is_err());
        assert_eq!(p.default_bound(), 70);
    }

    #[test]
    fn parameterized_schedules_match_formula() {
        for (cs, cm, ld) in [(2, 1, 1), (1, 2, 1), (3, 2, 3)] {
            let p = RsaParams { n: 6, cycles_square: cs, cycles_multiply: cm, setup_cycles: ld };
            let src = generate(&p).unwrap();
            for key in 1..64u64 {
                let want = expected_latency(&p, key).unwrap();
                assert_eq!(latency(&src, 6, key, 60), Some(want), "cs={cs} cm={cm} ld={ld} key={key:#x}");
            }
        }
    }
}
