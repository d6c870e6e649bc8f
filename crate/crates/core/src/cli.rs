//! Configuration files and the `construct` / `analyze` / `simulate` commands.
//!
//! A configuration is a sequence of sections. Each section header is followed
//! by whitespace-separated `key=value` tokens, on the header line or on later
//! lines; `#` starts a comment.
//!
//! ```text
//! [channel] type=qsc q=4 eps=0.15
//! [kernel]  kind=modadd
//! [construct]
//! n=10 mu=256 policy=greedy-exact
//! k_info=512 out_dir=run1
//! [simulate] trials=1000 seed=7
//! ```
//!
//! | section | keys |
//! |---|---|
//! | `[channel]` | `type` (`qsc`, `qec`, `bsc`, `oec`, `qam`, `matrix`), `q`, `eps` (comma-separated list for `oec`), `snr_db`, `grid_points`, `file` |
//! | `[kernel]` | `kind` (`modadd`, `field`, `sasoglu`), `q`, `gamma` |
//! | `[construct]` | `n`, `mu`, `policy` (`greedy-exact`, `greedy-pairs`, `threshold-l1`), `cyclic`, `premerge`, `c1`, `c2`, `k_info` or `rate`, `selection` (`capacity`, `bhattacharyya`), `out_dir`, `threads` |
//! | `[simulate]` | `trials`, `seed`, `frozen`, `out` |
//!
//! Unknown sections and keys are errors. Relative paths are resolved against
//! the directory of the configuration file.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use crate::alphabet::KernelSpec;
use crate::channel::{read_matrix_file, ChannelFamily};
use crate::construct::{construct_all_threads, select_code, CodeSpec, Construction, Selection};
use crate::error::{Error, Result};
use crate::merge::{MergePolicy, MergeRule};
use crate::sc::{simulate_fer, TrialReport};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Command {
    #[default]
    Construct,
    Analyze,
    Simulate,
}

#[derive(Clone, Debug, PartialEq)]
pub enum InfoSize {
    Count(usize),
    /// Bits per channel use.
    Rate(f64),
}

#[derive(Clone, Debug, PartialEq)]
pub struct SimulateConfig {
    pub trials: u64,
    pub seed: u64,
    /// Frozen set to use instead of constructing one.
    pub frozen: Option<PathBuf>,
    pub out: PathBuf,
}

#[derive(Clone, Debug)]
pub struct RunConfig {
    pub command: Command,
    pub channel: ChannelFamily,
    pub kernel: KernelSpec,
    pub n: usize,
    pub policy: MergePolicy,
    pub info: InfoSize,
    pub selection: Selection,
    pub out_dir: PathBuf,
    /// 0 = one worker per core.
    pub threads: usize,
    pub simulate: SimulateConfig,
}

impl RunConfig {
    pub fn block_len(&self) -> usize {
        1 << self.n
    }

    pub fn k_info(&self) -> usize {
        let big_n = self.block_len();
        match self.info {
            InfoSize::Count(k) => k,
            InfoSize::Rate(r) => {
                let k = (r * big_n as f64 / (self.kernel.q() as f64).log2()).round();
                (k.max(0.0) as usize).min(big_n)
            }
        }
    }
}

const SECTIONS: [(&str, &[&str]); 4] = [
    ("channel", &["type", "q", "eps", "snr_db", "grid_points", "file"]),
    ("kernel", &["kind", "q", "gamma"]),
    (
        "construct",
        &[
            "n", "mu", "policy", "cyclic", "premerge", "c1", "c2", "k_info", "rate", "selection", "out_dir",
            "threads",
        ],
    ),
    ("simulate", &["trials", "seed", "frozen", "out"]),
];

type Section = BTreeMap<String, String>;

fn tokenize(text: &str) -> Result<BTreeMap<String, Section>> {
    let mut sections: BTreeMap<String, Section> = BTreeMap::new();
    let mut current: Option<String> = None;
    for (ln, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("");
        let mut rest = line;
        let mut offset = 0;
        loop {
            let trimmed = rest.trim_start();
            offset += rest.len() - trimmed.len();
            if trimmed.is_empty() {
                break;
            }
            let column = line[..offset].chars().count() + 1;
            let err = |message: String| Error::Parse {
                line: ln + 1,
                column,
                message,
            };
            let word = |t: &str| t.find(|c: char| c.is_whitespace() || c == '=').unwrap_or(t.len());
            let len;
            if trimmed.starts_with('[') {
                len = trimmed.find(char::is_whitespace).unwrap_or(trimmed.len());
                let tok = &trimmed[..len];
                let name = tok[1..]
                    .strip_suffix(']')
                    .ok_or_else(|| err(format!("malformed section header `{tok}`")))?;
                if !SECTIONS.iter().any(|(s, _)| *s == name) {
                    return Err(err(format!("unknown section `[{name}]`")));
                }
                if sections.contains_key(name) {
                    return Err(err(format!("section `[{name}]` appears twice")));
                }
                sections.insert(name.to_string(), Section::new());
                current = Some(name.to_string());
            } else {
                // key, optional spaces, `=`, optional spaces, value
                let key = &trimmed[..word(trimmed)];
                let after_key = trimmed[key.len()..].trim_start();
                let Some(after_eq) = after_key.strip_prefix('=') else {
                    return Err(err(format!("expected key=value, found `{key}`")));
                };
                let value_start = after_eq.trim_start();
                let value = &value_start[..word(value_start)];
                if key.is_empty() || value.is_empty() {
                    return Err(err(format!("expected key=value after `{key}`")));
                }
                len = trimmed.len() - value_start.len() + value.len();
                let sec = current
                    .as_ref()
                    .ok_or_else(|| err("key=value before any section header".into()))?;
                let allowed = SECTIONS.iter().find(|(s, _)| s == sec).unwrap().1;
                if !allowed.contains(&key) {
                    return Err(Error::config(key, format!("unknown key in [{sec}]")));
                }
                let entries = sections.get_mut(sec).unwrap();
                if entries.insert(key.to_string(), value.to_string()).is_some() {
                    return Err(Error::config(key, format!("given twice in [{sec}]")));
                }
            }
            rest = &trimmed[len..];
            offset += len;
        }
    }
    Ok(sections)
}

struct Keys<'a> {
    sec: Option<&'a Section>,
}

impl Keys<'_> {
    fn raw(&self, key: &str) -> Option<&str> {
        self.sec.and_then(|s| s.get(key)).map(String::as_str)
    }

    fn get<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>> {
        self.raw(key)
            .map(|v| v.parse().map_err(|_| Error::config(key, format!("invalid value `{v}`"))))
            .transpose()
    }

    fn require<T: std::str::FromStr>(&self, key: &str) -> Result<T> {
        self.get(key)?.ok_or_else(|| Error::config(key, "missing"))
    }

    fn flag(&self, key: &str) -> Result<Option<bool>> {
        match self.raw(key) {
            None => Ok(None),
            Some("true" | "yes" | "on" | "1") => Ok(Some(true)),
            Some("false" | "no" | "off" | "0") => Ok(Some(false)),
            Some(v) => Err(Error::config(key, format!("expected a boolean, found `{v}`"))),
        }
    }
}

fn with_key(key: &str, r: Result<ChannelFamily>) -> Result<ChannelFamily> {
    r.map_err(|e| match e {
        Error::Domain(m) => Error::config(key, m),
        other => other,
    })
}

fn parse_channel(c: &Keys, base: &Path) -> Result<ChannelFamily> {
    let kind: String = c.require("type")?;
    let family = match kind.as_str() {
        "qsc" => ChannelFamily::Qsc {
            q: c.require("q")?,
            eps: c.require("eps")?,
        },
        "qec" => ChannelFamily::Qec {
            q: c.require("q")?,
            eps: c.require("eps")?,
        },
        "bsc" => ChannelFamily::Bsc { eps: c.require("eps")? },
        "oec" => {
            let raw: String = c.require("eps")?;
            let eps = raw
                .split(',')
                .map(|v| v.trim().parse::<f64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|_| Error::config("eps", format!("invalid list `{raw}`")))?;
            ChannelFamily::Oec { eps }
        }
        "qam" => ChannelFamily::QamAwgn {
            snr_db: c.require("snr_db")?,
            grid_points: c.get("grid_points")?.unwrap_or(64),
        },
        "matrix" => {
            let file: PathBuf = c.require("file")?;
            ChannelFamily::Matrix {
                rows: read_matrix_file(&base.join(file))?,
            }
        }
        other => return Err(Error::config("type", format!("unknown channel type `{other}`"))),
    };
    if let Some(q) = c.get::<usize>("q")? {
        if q != family.q() {
            return Err(Error::config("q", format!("{kind} channel has q = {}", family.q())));
        }
    }
    with_key("eps", family.transition_rows().map(|_| family.clone()))
}

fn parse_kernel(k: &Keys, q: usize) -> Result<KernelSpec> {
    if let Some(kq) = k.get::<usize>("q")? {
        if kq != q {
            return Err(Error::config("q", format!("kernel q = {kq} but channel q = {q}")));
        }
    }
    let kind: String = k.get("kind")?.unwrap_or_else(|| "modadd".into());
    let map = |r: Result<KernelSpec>, key: &str| {
        r.map_err(|e| match e {
            Error::Domain(m) | Error::Unsupported(m) => Error::config(key, m),
            other => other,
        })
    };
    match kind.as_str() {
        "modadd" => map(KernelSpec::mod_add(q), "q"),
        "field" => map(KernelSpec::field_gamma(q, k.get("gamma")?), "gamma"),
        "sasoglu" => map(KernelSpec::sasoglu(q), "q"),
        other => Err(Error::config("kind", format!("unknown kernel `{other}`"))),
    }
}

pub fn parse_policy_name(name: &str) -> Result<MergeRule> {
    match name {
        "greedy-exact" => Ok(MergeRule::GreedyExact),
        "greedy-pairs" => Ok(MergeRule::GreedyPairsOnly),
        "threshold-l1" => Ok(MergeRule::ThresholdL1 { c1: 10.0, c2: 2.0 }),
        other => Err(Error::config("policy", format!("unknown policy `{other}`"))),
    }
}

pub fn policy_name(rule: &MergeRule) -> &'static str {
    match rule {
        MergeRule::GreedyExact => "greedy-exact",
        MergeRule::GreedyPairsOnly => "greedy-pairs",
        MergeRule::ThresholdL1 { .. } => "threshold-l1",
    }
}

/// Parses a configuration; relative paths are resolved against `base`.
pub fn parse_config_in(text: &str, base: &Path) -> Result<RunConfig> {
    let sections = tokenize(text)?;
    let keys = |name: &str| Keys {
        sec: sections.get(name),
    };
    if !sections.contains_key("channel") {
        return Err(Error::config("type", "missing [channel] section"));
    }
    let channel = parse_channel(&keys("channel"), base)?;
    let kernel = parse_kernel(&keys("kernel"), channel.q())?;
    let c = keys("construct");
    let n: usize = c.require("n")?;
    if !(1..=24).contains(&n) {
        return Err(Error::config("n", "must be in 1..=24"));
    }
    let mut rule = parse_policy_name(&c.get::<String>("policy")?.unwrap_or_else(|| "greedy-exact".into()))?;
    if let MergeRule::ThresholdL1 { c1, c2 } = &mut rule {
        *c1 = c.get("c1")?.unwrap_or(*c1);
        *c2 = c.get("c2")?.unwrap_or(*c2);
        if !(*c1 > 0.0) {
            return Err(Error::config("c1", "must be positive"));
        }
        if !(*c2 > 0.0) {
            return Err(Error::config("c2", "must be positive"));
        }
    } else if c.raw("c1").is_some() || c.raw("c2").is_some() {
        let key = if c.raw("c1").is_some() { "c1" } else { "c2" };
        return Err(Error::config(key, "only used by policy=threshold-l1"));
    }
    let q = channel.q();
    let mu: usize = c.get("mu")?.unwrap_or(256);
    if mu < q {
        return Err(Error::config("mu", format!("must be at least q = {q}")));
    }
    let policy = MergePolicy {
        rule,
        mu,
        cyclic_no_loss: c.flag("cyclic")?.unwrap_or(true),
        plus_premerge: c.flag("premerge")?.unwrap_or(true),
    };
    let big_n = 1usize << n;
    let info = match (c.get::<usize>("k_info")?, c.get::<f64>("rate")?) {
        (Some(_), Some(_)) => return Err(Error::config("rate", "give either k_info or rate, not both")),
        (Some(k), None) if k > big_n => return Err(Error::config("k_info", format!("exceeds N = {big_n}"))),
        (Some(k), None) => InfoSize::Count(k),
        (None, Some(r)) if !(0.0..=(q as f64).log2()).contains(&r) => {
            return Err(Error::config("rate", "must lie in [0, log2 q]"))
        }
        (None, Some(r)) => InfoSize::Rate(r),
        (None, None) => InfoSize::Count(big_n / 2),
    };
    let selection = match c.get::<String>("selection")?.as_deref() {
        None | Some("capacity") => Selection::Capacity,
        Some("bhattacharyya") if q == 2 => Selection::Bhattacharyya,
        Some("bhattacharyya") => return Err(Error::config("selection", "bhattacharyya needs q = 2")),
        Some(other) => return Err(Error::config("selection", format!("unknown selection `{other}`"))),
    };
    let out_dir = base.join(c.get::<PathBuf>("out_dir")?.unwrap_or_else(|| PathBuf::from("out")));
    let threads = c.get("threads")?.unwrap_or(0);
    let s = keys("simulate");
    let trials = s.get("trials")?.unwrap_or(1000);
    if trials == 0 {
        return Err(Error::config("trials", "must be at least 1"));
    }
    let simulate = SimulateConfig {
        trials,
        seed: s.get("seed")?.unwrap_or(1),
        frozen: s.get::<PathBuf>("frozen")?.map(|p| base.join(p)),
        out: s
            .get::<PathBuf>("out")?
            .map(|p| base.join(p))
            .unwrap_or_else(|| out_dir.join("fer.csv")),
    };
    Ok(RunConfig {
        command: Command::Construct,
        channel,
        kernel,
        n,
        policy,
        info,
        selection,
        out_dir,
        threads,
        simulate,
    })
}

/// Parses a configuration with paths relative to the working directory.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    parse_config_in(text, Path::new(""))
}

pub fn read_config(path: &Path) -> Result<RunConfig> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_config_in(&text, path.parent().unwrap_or(Path::new("")))
}

/// Decimal rendering with `digits` significant digits.
pub fn format_sig(v: f64, digits: usize) -> String {
    if v == 0.0 || !v.is_finite() {
        return if v.is_finite() { "0".into() } else { v.to_string() };
    }
    let exp = v.abs().log10().floor() as i64;
    let decimals = (digits as i64 - 1 - exp).max(0) as usize;
    let s = format!("{v:.decimals$}");
    // rounding can carry into a new digit (9.9999999996 -> 10.00000000)
    let exp2 = s.trim_start_matches('-').parse::<f64>().map(|a| a.log10().floor() as i64).unwrap_or(exp);
    if exp2 > exp && decimals > 0 {
        format!("{v:.prec$}", prec = decimals - 1)
    } else {
        s
    }
}

fn write(path: &Path, contents: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
    }
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

/// Output of [`run_construct`].
#[derive(Clone, Debug)]
pub struct ConstructOutcome {
    pub construction: Construction,
    pub code: CodeSpec,
    pub channel_capacity: f64,
    pub average_capacity: f64,
    pub wall_seconds: f64,
}

impl ConstructOutcome {
    /// `I(W)` minus the average subchannel capacity.
    pub fn gap(&self) -> f64 {
        self.channel_capacity - self.average_capacity
    }
}

fn construct(cfg: &RunConfig) -> Result<ConstructOutcome> {
    let w = cfg.channel.build()?;
    let start = Instant::now();
    let construction = construct_all_threads(&w, &cfg.kernel, cfg.n, &cfg.policy, cfg.threads)?;
    let wall_seconds = start.elapsed().as_secs_f64();
    let code = select_code(&construction.records, cfg.k_info(), &cfg.kernel, &cfg.policy, cfg.selection)?;
    let recs = &construction.records;
    let average_capacity = recs.iter().map(|r| r.capacity).sum::<f64>() / recs.len() as f64;
    Ok(ConstructOutcome {
        construction,
        code,
        channel_capacity: w.symmetric_capacity(),
        average_capacity,
        wall_seconds,
    })
}

fn policy_echo(p: &MergePolicy) -> String {
    let mut s = format!(
        "{} mu={} cyclic={} premerge={}",
        policy_name(&p.rule),
        p.mu,
        p.cyclic_no_loss,
        p.plus_premerge
    );
    if let MergeRule::ThresholdL1 { c1, c2 } = p.rule {
        let _ = write!(s, " c1={c1} c2={c2}");
    }
    s
}

pub fn capacities_csv(construction: &Construction) -> String {
    let recs = &construction.records;
    let mut sorted: Vec<f64> = recs.iter().map(|r| r.capacity).collect();
    sorted.sort_by(f64::total_cmp);
    let mut out = String::from("index,capacity_bits,entropy_bits,out_size,sorted_capacity_bits\n");
    for (r, s) in recs.iter().zip(&sorted) {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            r.index,
            format_sig(r.capacity, 9),
            format_sig(r.entropy, 9),
            r.out_size,
            format_sig(*s, 9)
        );
    }
    out
}

fn frozen_txt(code: &CodeSpec) -> String {
    code.frozen.iter().map(|i| format!("{i}\n")).collect()
}

/// Runs the construction and writes `capacities.csv`, `frozen.txt` and
/// `summary.txt` to `cfg.out_dir`.
pub fn run_construct(cfg: &RunConfig) -> Result<ConstructOutcome> {
    let o = construct(cfg)?;
    let dir = &cfg.out_dir;
    write(&dir.join("capacities.csv"), &capacities_csv(&o.construction))?;
    write(&dir.join("frozen.txt"), &frozen_txt(&o.code))?;
    let mut s = String::new();
    let _ = writeln!(s, "channel: {:?}", cfg.channel);
    let _ = writeln!(s, "kernel: {}", cfg.kernel);
    let _ = writeln!(s, "n: {}", cfg.n);
    let _ = writeln!(s, "N: {}", cfg.block_len());
    let _ = writeln!(s, "policy: {}", policy_echo(&cfg.policy));
    let _ = writeln!(s, "symmetric_capacity_bits: {}", format_sig(o.channel_capacity, 9));
    let _ = writeln!(s, "average_capacity_bits: {}", format_sig(o.average_capacity, 9));
    let _ = writeln!(s, "gap_bits: {}", format_sig(o.gap(), 9));
    let _ = writeln!(s, "k_info: {}", o.code.info.len());
    let _ = writeln!(s, "rate_bits: {}", format_sig(o.code.rate_bits(), 9));
    let _ = writeln!(s, "wall_time_s: {:.3}", o.wall_seconds);
    write(&dir.join("summary.txt"), &s)?;
    Ok(o)
}

/// Runs the construction and reports, for every tree depth `l`, the gap
/// `I(W) - mean capacity` of the `2^l` subchannels. Writes `levels.csv`.
pub fn analyze(cfg: &RunConfig) -> Result<String> {
    let o = construct(cfg)?;
    let mut s = String::from("level,N,mean_capacity_bits,gap_bits,elapsed_s\n");
    for l in &o.construction.levels {
        let _ = writeln!(
            s,
            "{},{},{},{},{:.3}",
            l.level,
            1usize << l.level,
            format_sig(l.mean_capacity, 9),
            format_sig(o.channel_capacity - l.mean_capacity, 9),
            l.elapsed.as_secs_f64()
        );
    }
    write(&cfg.out_dir.join("levels.csv"), &s)?;
    Ok(s)
}

/// Reads a frozen set (one index per line).
pub fn read_frozen(path: &Path, big_n: usize) -> Result<Vec<usize>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (ln, line) in text.lines().enumerate() {
        let t = line.trim();
        if t.is_empty() {
            continue;
        }
        let i: usize = t.parse().map_err(|_| Error::Parse {
            line: ln + 1,
            column: line.find(t).unwrap_or(0) + 1,
            message: format!("`{t}` is not an index"),
        })?;
        if i >= big_n {
            return Err(Error::Parse {
                line: ln + 1,
                column: 1,
                message: format!("index {i} out of range for N = {big_n}"),
            });
        }
        out.push(i);
    }
    out.sort_unstable();
    out.dedup();
    Ok(out)
}

/// Simulates the code (constructed in-run unless a frozen file is configured)
/// and writes `fer.csv`.
pub fn run_simulate(cfg: &RunConfig) -> Result<TrialReport> {
    let code = match &cfg.simulate.frozen {
        Some(path) => {
            let big_n = cfg.block_len();
            let frozen = read_frozen(path, big_n)?;
            let info = (0..big_n).filter(|i| frozen.binary_search(i).is_err()).collect();
            CodeSpec {
                n: cfg.n,
                kernel: cfg.kernel.clone(),
                frozen,
                info,
                mu: cfg.policy.mu,
                policy: cfg.policy,
            }
        }
        None => run_construct(cfg)?.code,
    };
    let sim = &cfg.simulate;
    let report = simulate_fer(&code, &cfg.channel, sim.trials, sim.seed)?;
    let csv = format!(
        "trials,errors,fer,seed\n{},{},{},{}\n",
        report.trials,
        report.block_errors,
        format_sig(report.fer, 9),
        report.seed
    );
    write(&sim.out, &csv)?;
    Ok(report)
}
