//! `mlsda`: exponents, window sizes, Monte-Carlo sweeps and one-shot
//! encode/decode from the command line.

mod config;

use std::fs;
use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, ensure, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use mlsda::channel::{ebn0_to_epsilon, SoftObservation};
use mlsda::code::{bits_from_str, bits_to_string, CodeSpec, Message};
use mlsda::decoder::{DecodeResult, Decoder, DecoderConfig, Limit};
use mlsda::exponents::{self, bits_to_nats, nats_to_bits, Bsc, Dmc, GallagerChannel};
use mlsda::reference::viterbi_decode;
use mlsda::sim::{parse_limits, run_sweep, write_csv, write_csv_file, ChannelKind, EpsilonMap, SimConfig, Sweep};

#[derive(Parser, Debug)]
#[command(name = "mlsda", version, about = "Sequential ML decoding of convolutional codes with early elimination")]
#[command(args_override_self = true)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Print cutoff rate, capacity, exponents and window sizes.
    Exponents(ExponentArgs),
    /// Print only the early-elimination window ratio and minimum delta.
    Window(ExponentArgs),
    /// Run a Monte-Carlo sweep and write CSV records.
    Simulate(SimulateArgs),
    /// Decode one observation read from a file.
    Decode(DecodeArgs),
    /// Encode a message.
    Encode(EncodeArgs),
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum ChannelArg {
    Bsc,
    Dmc,
    Awgn,
}

#[derive(Args, Debug)]
struct ExponentArgs {
    #[arg(long, value_enum, default_value = "bsc")]
    channel: ChannelArg,
    /// BSC crossover probability.
    #[arg(long, conflicts_with = "ebn0")]
    epsilon: Option<f64>,
    /// Eb/N0 in dB, mapped to a crossover probability.
    #[arg(long)]
    ebn0: Option<f64>,
    #[arg(long, default_value = "direct")]
    ebn0_map: EpsilonMap,
    /// DMC transition rows, one per input: `0.9,0.1;0.2,0.8`.
    #[arg(long)]
    transition: Option<String>,
    /// DMC input distribution (uniform when omitted).
    #[arg(long)]
    input_dist: Option<String>,
    /// Code rate in bits per channel symbol, or `r0` for the cutoff rate.
    #[arg(long, conflicts_with = "rate_nats")]
    rate_bits: Option<String>,
    #[arg(long)]
    rate_nats: Option<f64>,
    /// Memory order; window lengths are in units of m + 1.
    #[arg(long)]
    m: usize,
}

#[derive(Args, Debug)]
struct CodeArgs {
    /// Octal generators, comma separated.
    #[arg(long)]
    code: String,
    /// Number of generators (checked against --code).
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    m: usize,
}

impl CodeArgs {
    fn spec(&self, msg_len: usize) -> Result<CodeSpec> {
        let code = CodeSpec::from_octal(&self.code, self.m, msg_len)?;
        if let Some(n) = self.n {
            ensure!(n == code.n(), "--n {n} but --code lists {} generators", code.n());
        }
        Ok(code)
    }
}

#[derive(Args, Debug)]
struct SimulateArgs {
    #[command(flatten)]
    code: CodeArgs,
    /// Information bits per trial.
    #[arg(long = "L")]
    msg_len: usize,
    #[arg(long, default_value = "bsc")]
    channel: ChannelKind,
    /// `start:stop:step` in dB, or a list.
    #[arg(long, conflicts_with = "epsilon")]
    ebn0: Option<String>,
    /// Crossover probabilities (bsc only).
    #[arg(long)]
    epsilon: Option<String>,
    #[arg(long, default_value = "direct")]
    ebn0_map: EpsilonMap,
    /// Windows to simulate, e.g. `10,12,15,inf`.
    #[arg(long, default_value = "inf")]
    delta: String,
    #[arg(long, default_value = "inf")]
    tau: Limit,
    #[arg(long, default_value = "inf")]
    openmax: Limit,
    #[arg(long, default_value_t = 1000)]
    trials: u64,
    #[arg(long)]
    target_errors: Option<u64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// CSV destination; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads (defaults to all cores).
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Args, Debug)]
struct DecodeArgs {
    #[command(flatten)]
    code: CodeArgs,
    /// File of log-likelihood ratios (positive favours 0), whitespace or comma separated.
    #[arg(long, conflicts_with = "hard")]
    llr: Option<PathBuf>,
    /// Hard decisions as a 0/1 string, all with unit weight.
    #[arg(long)]
    hard: Option<String>,
    #[arg(long, default_value = "inf")]
    delta: Limit,
    #[arg(long, default_value = "inf")]
    tau: Limit,
    #[arg(long, default_value = "inf")]
    openmax: Limit,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Use the Viterbi decoder instead.
    #[arg(long)]
    viterbi: bool,
}

#[derive(Args, Debug)]
struct EncodeArgs {
    #[command(flatten)]
    code: CodeArgs,
    /// Message as a 0/1 string.
    #[arg(long)]
    message: String,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let args = match config::expand(std::env::args_os().collect()) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("error: {e:#}");
            return ExitCode::FAILURE;
        }
    };
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(2) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    let stdout = io::stdout();
    let mut out = stdout.lock();
    match cli.command {
        Command::Exponents(a) => exponents_cmd(&a, &mut out),
        Command::Window(a) => window_cmd(&a, &mut out),
        Command::Simulate(a) => simulate_cmd(&a, &mut out),
        Command::Decode(a) => decode_cmd(&a, &mut out),
        Command::Encode(a) => encode_cmd(&a, &mut out),
    }
}

fn parse_floats(s: &str) -> Result<Vec<f64>> {
    s.split(',').map(|t| t.trim().parse::<f64>().with_context(|| format!("bad number {t:?}"))).collect()
}

fn channel_from(a: &ExponentArgs) -> Result<Box<dyn GallagerChannel>> {
    match a.channel {
        ChannelArg::Bsc => {
            let eps = match (a.epsilon, a.ebn0) {
                (Some(e), _) => e,
                // rate-scaled needs a rate in bits; take it from --rate-bits
                (None, Some(db)) => match a.ebn0_map {
                    EpsilonMap::Direct => ebn0_to_epsilon(db),
                    EpsilonMap::RateScaled => {
                        let r = a
                            .rate_bits
                            .as_deref()
                            .and_then(|r| r.parse::<f64>().ok())
                            .or(a.rate_nats.map(nats_to_bits));
                        let r = r.context("--ebn0-map rate-scaled needs a numeric rate")?;
                        ebn0_to_epsilon(db + 10.0 * r.log10())
                    }
                },
                (None, None) => bail!("bsc needs --epsilon or --ebn0"),
            };
            Ok(Box::new(Bsc::new(eps)?))
        }
        ChannelArg::Dmc => {
            let rows = a.transition.as_deref().context("dmc needs --transition")?;
            let rows: Vec<Vec<f64>> = rows.split(';').map(parse_floats).collect::<Result<_>>()?;
            let inputs = rows.len();
            let outputs = rows.first().map_or(0, Vec::len);
            ensure!(rows.iter().all(|r| r.len() == outputs), "every --transition row needs {outputs} entries");
            // stored output-major
            let t = (0..outputs).flat_map(|j| rows.iter().map(move |r| r[j])).collect();
            let dmc = match &a.input_dist {
                Some(p) => Dmc::new(inputs, outputs, t, parse_floats(p)?)?,
                None => Dmc::uniform(inputs, outputs, t)?,
            };
            Ok(Box::new(dmc))
        }
        ChannelArg::Awgn => bail!("exponents are defined for bsc and dmc channels"),
    }
}

fn rate_nats(a: &ExponentArgs, ch: &dyn GallagerChannel) -> Result<f64> {
    match (&a.rate_bits, a.rate_nats) {
        (Some(r), _) if r.eq_ignore_ascii_case("r0") => Ok(ch.cutoff_rate()),
        (Some(r), _) => Ok(bits_to_nats(r.parse::<f64>().with_context(|| format!("bad rate {r:?}"))?)),
        (None, Some(r)) => Ok(r),
        (None, None) => Ok(ch.cutoff_rate()),
    }
}

fn fmt_rule(r: &Result<exponents::WindowRule, exponents::ExponentError>) -> (String, String) {
    match r {
        Ok(w) => (format!("{:.6}", w.ratio), w.min_len.to_string()),
        Err(_) => ("inf".into(), "inf".into()),
    }
}

fn exponents_cmd(a: &ExponentArgs, out: &mut impl Write) -> Result<()> {
    let ch = channel_from(a)?;
    let rate = rate_nats(a, ch.as_ref())?;
    let r = exponents::report(ch.as_ref(), rate, a.m)?;
    let row = |out: &mut dyn Write, name: &str, nats: f64| {
        writeln!(out, "{name:<10} {nats:>12.6} {:>12.6}", nats_to_bits(nats))
    };
    writeln!(out, "{:<10} {:>12} {:>12}", "quantity", "nats", "bits")?;
    row(out, "R", r.rate_nats)?;
    row(out, "R0", r.r0_nats)?;
    row(out, "C", r.capacity_nats)?;
    row(out, "E_c", r.e_c)?;
    row(out, "E_el", r.e_el)?;
    row(out, "E_r", r.e_r)?;
    let (wr, wmin) = fmt_rule(&r.elimination);
    let (tr, tmin) = fmt_rule(&r.truncation);
    writeln!(out, "rho*       {:>12.6}", r.rho_star)?;
    writeln!(out, "window_ratio {wr}")?;
    writeln!(out, "delta_min {wmin}")?;
    writeln!(out, "trunc_ratio {tr}")?;
    writeln!(out, "tau_min {tmin}")?;
    Ok(())
}

fn window_cmd(a: &ExponentArgs, out: &mut impl Write) -> Result<()> {
    let ch = channel_from(a)?;
    let rate = rate_nats(a, ch.as_ref())?;
    let w = exponents::elimination_window(ch.as_ref(), rate, a.m)?;
    writeln!(out, "ratio {:.6}", w.ratio)?;
    writeln!(out, "delta_min {}", w.min_len)?;
    Ok(())
}

fn simulate_cmd(a: &SimulateArgs, out: &mut impl Write) -> Result<()> {
    let sweep = match (&a.ebn0, &a.epsilon) {
        (Some(s), _) => Sweep::parse_ebn0(s).map_err(anyhow::Error::msg)?,
        (None, Some(s)) => Sweep::parse_epsilon(s).map_err(anyhow::Error::msg)?,
        (None, None) => bail!("simulate needs --ebn0 or --epsilon"),
    };
    a.code.spec(a.msg_len)?;
    let cfg = SimConfig {
        code: a.code.code.clone(),
        m: a.code.m,
        msg_len: a.msg_len,
        channel: a.channel,
        sweep,
        epsilon_map: a.ebn0_map,
        deltas: parse_limits(&a.delta).map_err(anyhow::Error::msg)?,
        tau: a.tau,
        openmax: a.openmax,
        trials: a.trials,
        target_errors: a.target_errors,
        seed: a.seed,
    };
    cfg.validate()?;
    if let Some(t) = a.threads {
        rayon::ThreadPoolBuilder::new().num_threads(t).build_global().context("configuring threads")?;
    }
    let records = run_sweep(&cfg)?;
    match &a.out {
        Some(path) => {
            write_csv_file(&records, path).with_context(|| format!("writing {}", path.display()))?;
            for r in &records {
                let point = r.ebn0_db.map_or(format!("eps {}", r.epsilon), |db| format!("{db} dB"));
                writeln!(
                    out,
                    "{point} delta {}: ber {:.3e} ({} errors / {} bits), {:.2} branches/bit, p99.9 stack {}",
                    r.delta, r.ber, r.bit_errors, r.info_bits, r.avg_branch_computations_per_bit, r.p999_stack_size
                )?;
            }
        }
        None => write_csv(&records, out)?,
    }
    Ok(())
}

fn read_observation(a: &DecodeArgs) -> Result<SoftObservation> {
    match (&a.llr, &a.hard) {
        (Some(path), _) => {
            let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            let llrs: Vec<f64> = text
                .split(|c: char| c.is_whitespace() || c == ',')
                .filter(|t| !t.is_empty())
                .map(|t| t.parse::<f64>().with_context(|| format!("bad LLR {t:?}")))
                .collect::<Result<_>>()?;
            ensure!(llrs.iter().all(|x| x.is_finite()), "LLRs must be finite");
            Ok(SoftObservation::from_llrs(&llrs))
        }
        (None, Some(bits)) => Ok(SoftObservation::hard(bits_from_str(bits)?)?),
        (None, None) => bail!("decode needs --llr or --hard"),
    }
}

fn decode_cmd(a: &DecodeArgs, out: &mut impl Write) -> Result<()> {
    let obs = read_observation(a)?;
    let n = a.code.spec(1)?.n();
    let depth = obs.len() / n;
    ensure!(
        obs.len() % n == 0 && depth > a.code.m,
        "observation length {} is not n (L + m) for n = {n}, m = {}",
        obs.len(),
        a.code.m
    );
    let code = a.code.spec(depth - a.code.m)?;
    let res: DecodeResult = if a.viterbi {
        viterbi_decode(&code, &obs)?
    } else {
        let cfg = DecoderConfig { delta: a.delta, tau: a.tau, openmax: a.openmax, seed: a.seed };
        Decoder::new(code.clone()).decode(&obs, &cfg)?
    };
    writeln!(out, "message {}", bits_to_string(&res.message))?;
    writeln!(out, "codeword {}", bits_to_string(&res.codeword))?;
    writeln!(out, "metric {}", res.metric)?;
    if !a.viterbi {
        let s = &res.stats;
        writeln!(out, "branch_computations {}", s.branch_computations)?;
        writeln!(out, "peak_stack {}", s.peak_stack)?;
        writeln!(out, "early_eliminations {}", s.early_eliminations)?;
        writeln!(out, "evictions {}", s.evictions)?;
    }
    Ok(())
}

fn encode_cmd(a: &EncodeArgs, out: &mut impl Write) -> Result<()> {
    let msg = Message::new(bits_from_str(&a.message)?)?;
    let code = a.code.spec(msg.len())?;
    writeln!(out, "{}", bits_to_string(&code.encode(&msg)?))?;
    Ok(())
}
