use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, ensure, Context, Result};
use pascal_core::bench::{self, RsaParams};
use pascal_core::compensator::{harden, overhead, structural_diff, synthesize_spec};
use pascal_core::enumerate::{
    check_noninterference, enumerate_classes, Backend, EnumOptions, Noninterference, TimingClassReport,
};
use pascal_core::hdl::{self, PragmaSet};
use pascal_core::ir::Design;
use pascal_core::report::{emit_report, sha256_hex, ReportDocument};
use pascal_core::sat::{parse_dimacs, ExternalSolver, SolveResult, Solver};
use pascal_core::sim::{cosim_equiv, CosimVerdict, Valuation};
use pascal_core::taint::{has_security_path, SecurityPath};

use crate::{exit, BenchCommand, Command, DesignArgs, EngineArgs};

pub fn dispatch(cmd: Command) -> Result<u8> {
    match cmd {
        Command::Check { file, design } => check(&Loaded::read(&file, &design)?),
        Command::Enumerate { file, design, engine, output, trace } => {
            enumerate(&Loaded::read(&file, &design)?, &engine, &output.out_dir, trace)
        }
        Command::Harden { file, design, engine, output, report, samples, seed } => {
            let job = HardenJob { engine: &engine, out_dir: &output.out_dir, report: report.as_deref(), samples, seed };
            harden_verb(&Loaded::read(&file, &design)?, &job)
        }
        Command::Verify { file, design, engine, report, out_dir } => {
            verify(&Loaded::read(&file, &design)?, &engine, report.as_deref(), out_dir.as_deref())
        }
        Command::Bench { which: BenchCommand::Rsa { bits, cs, cm, setup, out_dir } } => {
            let p = RsaParams { n: bits, cycles_square: cs, cycles_multiply: cm, setup_cycles: setup };
            let text = bench::generate(&p)?;
            fs::create_dir_all(&out_dir).with_context(|| format!("creating {}", out_dir.display()))?;
            let path = out_dir.join(format!("{}.mhdl", p.module_name()));
            fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
            println!("{}", path.display());
            Ok(exit::SECURE)
        }
        Command::Sat { file } => sat(&file),
    }
}

/// A parsed and elaborated input file.
struct Loaded {
    path: PathBuf,
    source: String,
    design: Design,
    bound: Option<u32>,
}

impl Loaded {
    fn read(path: &Path, args: &DesignArgs) -> Result<Loaded> {
        let source = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let module = hdl::parse(&source).with_context(|| path.display().to_string())?;
        let mut pragmas = PragmaSet::from_module(&module).with_context(|| path.display().to_string())?;
        if let Some(side) = &args.pragmas {
            let text = fs::read_to_string(side).with_context(|| format!("reading {}", side.display()))?;
            let over = PragmaSet::parse_sidecar(&text).with_context(|| side.display().to_string())?;
            pragmas = pragmas.overridden_by(&over);
        }
        let design = hdl::elaborate(&module, &pragmas).with_context(|| path.display().to_string())?;
        Ok(Loaded { path: path.to_path_buf(), source, design, bound: pragmas.bound })
    }

    fn stem(&self) -> String {
        self.path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| self.design.name.clone())
    }

    fn document(&self, bound: u32, taint: &SecurityPath) -> ReportDocument {
        ReportDocument::new(&self.design.name, Some(&self.path), &self.source, bound, taint)
    }

    fn options(&self, e: &EngineArgs) -> Result<EnumOptions> {
        let bound = e
            .bound
            .or(self.bound)
            .ok_or_else(|| anyhow!("{}: no --bound given and no @bound pragma", self.path.display()))?;
        ensure!(bound >= 1, "bound must be at least 1");
        let mut opts = EnumOptions::new(bound).with_mode(e.mode()).with_pinned(parse_pins(&e.pins)?);
        opts.query_timeout = e.timeout();
        if let Some(cmd) = e.solver_cmd.as_deref().filter(|c| !c.trim().is_empty()) {
            opts.backend = Backend::External(ExternalSolver::new(cmd));
        }
        Ok(opts)
    }
}

fn parse_pins(pins: &[String]) -> Result<Valuation> {
    let mut out = Valuation::new();
    for pin in pins {
        let (name, value) = pin.split_once('=').ok_or_else(|| anyhow!("--pin `{pin}`: expected NAME=VALUE"))?;
        let value = value.trim();
        let parsed = match value.strip_prefix("0x").or_else(|| value.strip_prefix("0X")) {
            Some(hex) => u64::from_str_radix(hex, 16),
            None => value.parse(),
        };
        let v = parsed.map_err(|e| anyhow!("--pin `{pin}`: {e}"))?;
        out.insert(name.trim().to_string(), v);
    }
    Ok(out)
}

fn print_taint(p: &SecurityPath) {
    let verdict = serde_json::to_value(p.verdict).ok().and_then(|v| v.as_str().map(str::to_string));
    println!("taint: {}", verdict.unwrap_or_default());
    if p.exists() {
        println!("tainted observables: {}", p.tainted_observables.join(" "));
    }
    if !p.cone.is_empty() {
        println!("cone: {}", p.cone.iter().cloned().collect::<Vec<_>>().join(" "));
    }
}

fn check(l: &Loaded) -> Result<u8> {
    let p = has_security_path(&l.design);
    print_taint(&p);
    Ok(if p.exists() { exit::CHANNEL } else { exit::SECURE })
}

fn print_classes(r: &TimingClassReport) {
    let lats: Vec<String> = r.latencies().iter().map(u32::to_string).collect();
    let status = if r.exhausted { "exhausted" } else { "INCONCLUSIVE" };
    println!("classes: {} [{}] ({status}, bound {})", r.classes.len(), lats.join(" "), r.bound);
    if r.never_completes {
        println!("done never rises within the bound");
    }
}

fn print_ni(ni: &Noninterference) {
    match ni {
        Noninterference::Secure { bound } => println!("noninterference: SECURE up to {bound} cycles"),
        Noninterference::Inconclusive { bound } => println!("noninterference: INCONCLUSIVE at bound {bound}"),
        Noninterference::Leak { a, b } => println!(
            "noninterference: LEAK (secrets {:?} -> {:?}, {:?} -> {:?})",
            a.stimulus.secret, a.latency, b.stimulus.secret, b.latency
        ),
    }
}

fn verdict_code(r: &TimingClassReport, ni: &Noninterference) -> u8 {
    match ni {
        Noninterference::Leak { .. } => exit::CHANNEL,
        Noninterference::Inconclusive { .. } => exit::INCONCLUSIVE,
        Noninterference::Secure { .. } if !r.exhausted => exit::INCONCLUSIVE,
        Noninterference::Secure { .. } => exit::SECURE,
    }
}

fn write_reports(doc: &ReportDocument, dir: &Path, stem: &str) -> Result<()> {
    for p in emit_report(doc, dir, stem)? {
        println!("wrote {}", p.display());
    }
    Ok(())
}

/// Timing classes and the noninterference verdict, plus a compensator spec
/// when the class set is complete.
fn analyse(l: &Loaded, opts: &EnumOptions, doc: &mut ReportDocument) -> Result<()> {
    let r = enumerate_classes(&l.design, opts)?;
    print_classes(&r);
    let ni = check_noninterference(&l.design, opts)?;
    print_ni(&ni);
    if r.exhausted && !r.classes.is_empty() {
        doc.compensator = Some(synthesize_spec(&r)?.bind(&l.design)?);
        doc.overhead = Some(overhead(&r, &l.design)?);
    }
    doc.timing = Some(r);
    doc.noninterference = Some(ni);
    Ok(())
}

fn enumerate(l: &Loaded, e: &EngineArgs, out_dir: &Path, trace: bool) -> Result<u8> {
    let opts = l.options(e)?;
    let taint = has_security_path(&l.design);
    print_taint(&taint);
    let mut doc = l.document(opts.bound, &taint);
    analyse(l, &opts, &mut doc)?;
    let stem = l.stem();
    write_reports(&doc, out_dir, &stem)?;
    let timing = doc.timing.as_ref().expect("analysed");
    if trace {
        for c in &timing.classes {
            let p = out_dir.join(format!("{stem}.class{}.trace", c.latency));
            fs::write(&p, c.witness.dump()).with_context(|| format!("writing {}", p.display()))?;
        }
        println!("wrote {} trace(s)", timing.classes.len());
    }
    Ok(verdict_code(timing, doc.noninterference.as_ref().expect("analysed")))
}

struct HardenJob<'a> {
    engine: &'a EngineArgs,
    out_dir: &'a Path,
    report: Option<&'a Path>,
    samples: usize,
    seed: u64,
}

fn read_report(path: &Path) -> Result<ReportDocument> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    ReportDocument::from_json(&text).with_context(|| path.display().to_string())
}

fn harden_verb(l: &Loaded, job: &HardenJob) -> Result<u8> {
    let opts = l.options(job.engine)?;
    let taint = has_security_path(&l.design);
    print_taint(&taint);
    if !taint.exists() {
        println!("nothing to harden: no secret reaches an observable");
        return Ok(exit::SECURE);
    }
    let mut doc = l.document(opts.bound, &taint);
    let spec = match job.report {
        Some(path) => {
            let prior = read_report(path)?;
            ensure!(
                prior.design.sha256 == sha256_hex(&l.source),
                "{} was produced for a different source (sha256 {})",
                path.display(),
                prior.design.sha256
            );
            let spec = prior.compensator.clone().ok_or_else(|| anyhow!("{} has no compensator", path.display()))?;
            println!("compensator from {}: t_max {}", path.display(), spec.t_max);
            doc = prior;
            spec
        }
        None => {
            analyse(l, &opts, &mut doc)?;
            let timing = doc.timing.as_ref().expect("analysed");
            if !timing.exhausted {
                eprintln!("enumeration inconclusive; refusing to harden from a partial class set");
                return Ok(exit::INCONCLUSIVE);
            }
            ensure!(!timing.never_completes, "done never rises within bound {}; nothing to pad to", opts.bound);
            doc.compensator.clone().expect("exhausted with classes")
        }
    };
    ensure!(spec.t_max <= opts.bound, "t_max {} exceeds the bound {}", spec.t_max, opts.bound);

    let hardened = harden(&l.design, &spec)?;
    let bound = spec.bind(&l.design)?;
    let mut text = format!("// @bound {}\n", opts.bound);
    text.push_str(&hdl::emit(&hardened));
    let reloaded = hdl::load(&text).context("re-reading the emitted hardened design")?;

    let changes = structural_diff(&l.design, &reloaded, &bound.rename_map());
    if !changes.is_empty() {
        for c in &changes {
            eprintln!("structural change: {}: {}", c.signal, c.detail);
        }
        bail!("hardening altered {} original signal(s)", changes.len());
    }
    println!("structural diff: original nets and next-state functions unchanged");

    match cosim_equiv(&l.design, &reloaded, job.samples, opts.bound, job.seed)? {
        CosimVerdict::Pass { checked, skipped } => {
            println!("co-simulation: PASS ({checked} stimuli, {skipped} never completed)")
        }
        CosimVerdict::Fail { stimulus, port, expected, actual } => {
            bail!("co-simulation mismatch on `{port}`: expected {expected:?}, got {actual:?} for {stimulus:?}")
        }
    }

    let ni = check_noninterference(&reloaded, &opts)?;
    print_ni(&ni);

    fs::create_dir_all(job.out_dir).with_context(|| format!("creating {}", job.out_dir.display()))?;
    let out = job.out_dir.join(format!("{}_hardened.mhdl", l.stem()));
    fs::write(&out, &text).with_context(|| format!("writing {}", out.display()))?;
    println!("wrote {}", out.display());
    write_reports(&doc, job.out_dir, &l.stem())?;

    Ok(match ni {
        Noninterference::Secure { .. } => exit::SECURE,
        Noninterference::Leak { .. } => exit::CHANNEL,
        Noninterference::Inconclusive { .. } => exit::INCONCLUSIVE,
    })
}

fn verify(l: &Loaded, e: &EngineArgs, report: Option<&Path>, out_dir: Option<&Path>) -> Result<u8> {
    let opts = l.options(e)?;
    let expected = match report {
        Some(p) => {
            let doc = read_report(p)?;
            Some(doc.compensator.ok_or_else(|| anyhow!("{} has no compensator", p.display()))?.t_max)
        }
        None => None,
    };
    let taint = has_security_path(&l.design);
    let mut doc = l.document(opts.bound, &taint);
    analyse(l, &opts, &mut doc)?;
    if let Some(dir) = out_dir {
        write_reports(&doc, dir, &l.stem())?;
    }
    let timing = doc.timing.as_ref().expect("analysed");
    let ni = doc.noninterference.as_ref().expect("analysed");
    let code = verdict_code(timing, ni);
    if code == exit::INCONCLUSIVE {
        return Ok(code);
    }
    let lats = timing.latencies();
    if lats.len() != 1 {
        println!("verify: FAIL, expected exactly one timing class, found {}", lats.len());
        return Ok(exit::CHANNEL);
    }
    let only = *lats.iter().next().expect("one class");
    if let Some(t) = expected.filter(|&t| t != only) {
        println!("verify: FAIL, single class {only} differs from compensator t_max {t}");
        return Ok(exit::CHANNEL);
    }
    if code == exit::SECURE {
        println!("verify: PASS, one class at {only}");
    }
    Ok(code)
}

fn sat(path: &Path) -> Result<u8> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let cnf = parse_dimacs(&text)?;
    let mut solver = Solver::from_cnf(&cnf);
    match solver.solve(&[]) {
        SolveResult::Sat => {
            println!("s SATISFIABLE");
            let lits: Vec<String> = (0..cnf.num_vars())
                .map(|v| {
                    let n = i64::from(v) + 1;
                    if solver.model().get(v as usize).copied().unwrap_or(false) {
                        n.to_string()
                    } else {
                        (-n).to_string()
                    }
                })
                .collect();
            for chunk in lits.chunks(16) {
                println!("v {}", chunk.join(" "));
            }
            println!("v 0");
            Ok(exit::SAT)
        }
        SolveResult::Unsat => {
            println!("s UNSATISFIABLE");
            Ok(exit::UNSAT)
        }
        SolveResult::Unknown => {
            println!("s UNKNOWN");
            Ok(exit::INCONCLUSIVE)
        }
    }
}
