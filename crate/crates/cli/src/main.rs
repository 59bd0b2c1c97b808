//! `nrcb`: command-line front end for the nr-codebook library.

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use nr_codebook::chansim::{
    csv_row, decode_report, encode_user, fmt_sig, gen_drop, port_context, sweep, Drop,
    EncoderParams, PortContext, SchemeSpec, SimConfig, CSV_HEADER,
};
use nr_codebook::codec::{parse, serialize};
use nr_codebook::etype2::Ratio;
use nr_codebook::fetype2ps::{PortMode, PortPrecoders};
use nr_codebook::linalg::{nmse, subband_targets};
use nr_codebook::overhead::overhead_report;
use nr_codebook::pmi::{CodebookConfig, PmiType1SP};
use nr_codebook::{AntennaConfig, CodebookKind, Pmi, Precoder, C64};
use serde::Deserialize;

#[derive(Debug, thiserror::Error)]
enum CliError {
    /// Invalid flags, configuration or PMI: exit code 2.
    #[error("{0}")]
    Usage(String),
    /// I/O or other runtime failure: exit code 1.
    #[error("{0}")]
    Runtime(String),
}

impl From<nr_codebook::Error> for CliError {
    fn from(e: nr_codebook::Error) -> Self {
        CliError::Usage(e.to_string())
    }
}

type Result<T> = std::result::Result<T, CliError>;

#[derive(Parser, Debug)]
#[command(name = "nrcb", version, about = "5G NR CSI codebook tool")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Print the precoder of an explicit PMI.
    Codeword {
        #[command(flatten)]
        run: RunArgs,
        /// Horizontal beam index (Type I single panel).
        #[arg(long)]
        m1: Option<usize>,
        /// Vertical beam index (Type I single panel).
        #[arg(long)]
        m2: Option<usize>,
        /// Co-phase index, applied to every subband (Type I single panel).
        #[arg(long)]
        n: Option<usize>,
        /// Neighbor-beam offset (Type I single panel, ranks 3 and 4 above 16 ports).
        #[arg(long)]
        i13: Option<usize>,
        /// PMI as JSON, or @path to a JSON file.
        #[arg(long)]
        pmi: Option<String>,
    },
    /// Encode the PMI of a seeded channel and print it as JSON.
    Encode {
        #[command(flatten)]
        run: RunArgs,
    },
    /// Parse a hex payload and print the decoded precoder.
    Decode {
        #[command(flatten)]
        run: RunArgs,
        /// Payload in hex as produced by `encode`.
        #[arg(long)]
        payload: String,
    },
    /// Encode, serialize, parse and decode a seeded channel; report fidelity and overhead.
    Roundtrip {
        #[command(flatten)]
        run: RunArgs,
    },
    /// Overhead table, one CSV row per codebook kind.
    Overhead {
        #[command(flatten)]
        run: RunArgs,
    },
    /// MU-MIMO spectral-efficiency sweep written as CSV.
    Simulate {
        #[command(flatten)]
        run: RunArgs,
    },
}

/// Run configuration flags; each overrides the matching field of `--config`.
#[derive(Args, Debug, Default)]
struct RunArgs {
    /// JSON file with run configuration fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Codebook kind (type1sp, type1mp, type2, type2ps, etype2, etype2ps,
    /// fetype2ps, and genie for simulate). Repeatable.
    #[arg(long = "kind")]
    kinds: Vec<String>,
    #[arg(long)]
    n1: Option<usize>,
    #[arg(long)]
    n2: Option<usize>,
    #[arg(long)]
    o1: Option<usize>,
    #[arg(long)]
    o2: Option<usize>,
    /// Panel count.
    #[arg(long)]
    ng: Option<usize>,
    /// Subband count.
    #[arg(long = "n3")]
    n_3: Option<usize>,
    #[arg(long)]
    rank: Option<usize>,
    /// Spatial basis size L.
    #[arg(long = "l")]
    l_beams: Option<usize>,
    /// Frequency-basis fraction p_v, e.g. 1/4.
    #[arg(long)]
    p_v: Option<String>,
    /// Coefficient budget fraction; repeatable in simulate.
    #[arg(long = "beta")]
    betas: Vec<String>,
    /// Subbands per CQI subband R.
    #[arg(long)]
    r: Option<usize>,
    /// Port-selection stride.
    #[arg(long)]
    d: Option<usize>,
    /// Selected-port fraction of FeType2PS, e.g. 1/2.
    #[arg(long)]
    alpha: Option<String>,
    /// FeType2PS frequency basis count.
    #[arg(long)]
    m: Option<usize>,
    /// FeType2PS nonzero-bin range N.
    #[arg(long)]
    n_big: Option<usize>,
    #[arg(long)]
    n_psk: Option<usize>,
    /// Beamformed ports per polarization for port-selection kinds.
    #[arg(long)]
    n_ports: Option<usize>,
    /// Report Type II subband amplitudes.
    #[arg(long)]
    subband_amplitude: Option<bool>,
    /// Type I multi-panel codebook mode.
    #[arg(long)]
    c_m: Option<usize>,
    /// FeType2PS port derivation (eigen or dft); repeatable in simulate.
    #[arg(long = "port-mode")]
    port_modes: Vec<String>,
    /// Users K.
    #[arg(long)]
    users: Option<usize>,
    #[arg(long)]
    n_rx: Option<usize>,
    #[arg(long)]
    paths: Option<usize>,
    #[arg(long)]
    ul_snapshots: Option<usize>,
    #[arg(long)]
    snr_db: Option<f64>,
    #[arg(long)]
    drops: Option<usize>,
    #[arg(long, env = "NR_CB_SEED")]
    seed: Option<u64>,
    /// Output file; stdout when absent.
    #[arg(long)]
    output: Option<PathBuf>,
}

/// Configuration file contents. Every field is optional.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RunConfig {
    #[serde(default)]
    kinds: Vec<String>,
    n1: Option<usize>,
    n2: Option<usize>,
    o1: Option<usize>,
    o2: Option<usize>,
    ng: Option<usize>,
    n_3: Option<usize>,
    rank: Option<usize>,
    l_beams: Option<usize>,
    p_v: Option<String>,
    #[serde(default)]
    betas: Vec<String>,
    r: Option<usize>,
    d: Option<usize>,
    alpha: Option<String>,
    m: Option<usize>,
    n_big: Option<usize>,
    n_psk: Option<usize>,
    n_ports: Option<usize>,
    subband_amplitude: Option<bool>,
    c_m: Option<usize>,
    #[serde(default)]
    port_modes: Vec<String>,
    users: Option<usize>,
    n_rx: Option<usize>,
    paths: Option<usize>,
    ul_snapshots: Option<usize>,
    snr_db: Option<f64>,
    drops: Option<usize>,
    seed: Option<u64>,
    output: Option<PathBuf>,
}

/// Fully resolved run settings.
#[derive(Debug)]
struct Run {
    kinds: Vec<String>,
    sim: SimConfig,
    rank: usize,
    params: EncoderParams,
    betas: Vec<Ratio>,
    port_modes: Vec<PortMode>,
    output: Option<PathBuf>,
}

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

fn ratio(field: &str, s: &str) -> Result<Ratio> {
    s.parse::<Ratio>()
        .map_err(|e| usage(format!("invalid {field} {s:?}: {e}")))
}

fn port_mode(s: &str) -> Result<PortMode> {
    match s {
        "eigen" => Ok(PortMode::EigenBased),
        "dft" => Ok(PortMode::DftBased),
        _ => Err(usage(format!(
            "invalid port-mode {s:?}: expected eigen or dft"
        ))),
    }
}

impl RunArgs {
    fn resolve(self) -> Result<Run> {
        let file = match &self.config {
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))?;
                serde_json::from_str::<RunConfig>(&text)
                    .map_err(|e| usage(format!("{}: {e}", path.display())))?
            }
            None => RunConfig::default(),
        };
        let pick = |flag: Vec<String>, file: Vec<String>| if flag.is_empty() { file } else { flag };
        let d = EncoderParams::default();
        let n1 = self.n1.or(file.n1).unwrap_or(4);
        let n2 = self.n2.or(file.n2).unwrap_or(4);
        let default_o = |n: usize| if n == 1 { 1 } else { 4 };
        let antenna = AntennaConfig {
            n1,
            n2,
            o1: self.o1.or(file.o1).unwrap_or(default_o(n1)),
            o2: self.o2.or(file.o2).unwrap_or(default_o(n2)),
            ng: self.ng.or(file.ng).unwrap_or(1),
        };
        antenna.validate()?;
        let rank = self.rank.or(file.rank).unwrap_or(1);
        let betas = pick(self.betas, file.betas)
            .iter()
            .map(|s| ratio("beta", s))
            .collect::<Result<Vec<_>>>()?;
        let port_modes = pick(self.port_modes, file.port_modes)
            .iter()
            .map(|s| port_mode(s))
            .collect::<Result<Vec<_>>>()?;
        let params = EncoderParams {
            l_beams: self.l_beams.or(file.l_beams).unwrap_or(d.l_beams),
            p_v: match self.p_v.or(file.p_v) {
                Some(s) => ratio("p_v", &s)?,
                None => d.p_v,
            },
            beta: betas.first().copied().unwrap_or(d.beta),
            r: self.r.or(file.r).unwrap_or(d.r),
            n_psk: self.n_psk.or(file.n_psk).unwrap_or(d.n_psk),
            subband_amplitude: self
                .subband_amplitude
                .or(file.subband_amplitude)
                .unwrap_or(d.subband_amplitude),
            d: self.d.or(file.d).unwrap_or(d.d),
            n_ports: self.n_ports.or(file.n_ports).unwrap_or(d.n_ports),
            alpha: match self.alpha.or(file.alpha) {
                Some(s) => ratio("alpha", &s)?,
                None => d.alpha,
            },
            m: self.m.or(file.m).unwrap_or(d.m),
            n_big: self.n_big.or(file.n_big).unwrap_or(d.n_big),
            port_mode: port_modes.first().copied().unwrap_or(d.port_mode),
            c_m: self.c_m.or(file.c_m).unwrap_or(d.c_m),
        };
        let sim = SimConfig {
            antenna,
            n_rx: self.n_rx.or(file.n_rx).unwrap_or(rank),
            n_3: self.n_3.or(file.n_3).unwrap_or(13),
            users: self.users.or(file.users).unwrap_or(4),
            n_paths: self.paths.or(file.paths).unwrap_or(6),
            ul_snapshots: self.ul_snapshots.or(file.ul_snapshots).unwrap_or(4),
            snr_db: self.snr_db.or(file.snr_db).unwrap_or(10.0),
            drops: self.drops.or(file.drops).unwrap_or(100),
            seed: self.seed.or(file.seed).unwrap_or(1),
        };
        Ok(Run {
            kinds: pick(self.kinds, file.kinds),
            sim,
            rank,
            params,
            betas,
            port_modes,
            output: self.output.or(file.output),
        })
    }
}

impl Run {
    fn kind(&self) -> Result<CodebookKind> {
        match self.kinds.as_slice() {
            [one] => {
                CodebookKind::from_name(one).ok_or_else(|| usage(format!("unknown kind {one:?}")))
            }
            [] => Err(usage("--kind is required")),
            _ => Err(usage("exactly one --kind expected")),
        }
    }

    /// Single-user configuration of `kind` at the requested rank.
    fn config(&self, kind: CodebookKind) -> Result<CodebookConfig> {
        let single = SimConfig {
            users: 1,
            ..self.sim
        };
        let config = SchemeSpec::codebook(kind, self.params)
            .codebook_config(&single)?
            .expect("codebook schemes carry a configuration")
            .with_rank(self.rank);
        config.validate()?;
        Ok(config)
    }

    /// Seeded single-user channel with its uplink snapshots.
    fn channel(&self) -> Result<Drop> {
        let single = SimConfig {
            users: 1,
            drops: 1,
            ..self.sim
        };
        single.validate()?;
        Ok(gen_drop(&single, 0)?)
    }

    fn write(&self, text: &str) -> Result<()> {
        match &self.output {
            Some(path) => std::fs::write(path, text)
                .map_err(|e| CliError::Runtime(format!("{}: {e}", path.display()))),
            None => std::io::stdout()
                .write_all(text.as_bytes())
                .map_err(|e| CliError::Runtime(e.to_string())),
        }
    }
}

fn fmt_complex(z: C64) -> String {
    let snap = |x: f64| if x.abs() < 1e-12 { 0.0 } else { x };
    let z = C64::new(snap(z.re), snap(z.im));
    let sign = if z.im.is_sign_negative() { '-' } else { '+' };
    format!("{}{sign}{}j", fmt_sig(z.re), fmt_sig(z.im.abs()))
}

fn render_precoder(w: &Precoder) -> String {
    let mut out = String::new();
    for (t, m) in w.subbands.iter().enumerate() {
        out += &format!("subband {t}\n");
        for row in m.row_iter() {
            let cells: Vec<String> = row.iter().map(|&z| fmt_complex(z)).collect();
            out += &cells.join(" ");
            out.push('\n');
        }
    }
    out
}

fn read_pmi(arg: &str) -> Result<Pmi> {
    let text = match arg.strip_prefix('@') {
        Some(path) => {
            std::fs::read_to_string(path).map_err(|e| CliError::Runtime(format!("{path}: {e}")))?
        }
        None => arg.to_string(),
    };
    serde_json::from_str(&text).map_err(|e| usage(format!("invalid PMI: {e}")))
}

/// Port context for printing without an uplink: port-selection kinds are
/// shown in the port domain.
fn port_domain(config: &CodebookConfig) -> PortContext {
    match config {
        CodebookConfig::FeType2PS(c) => {
            PortContext::Precoders(PortPrecoders::identity(c.n_ports, c.n_3))
        }
        _ => PortContext::Antennas,
    }
}

fn port_antenna(config: &CodebookConfig, antenna: AntennaConfig) -> AntennaConfig {
    match config {
        CodebookConfig::Type2(c) if c.port_selection.is_some() => c.antenna,
        CodebookConfig::EType2(c) if c.port_selection.is_some() => c.antenna,
        _ => antenna,
    }
}

fn cmd_codeword(
    run: Run,
    (m1, m2, n, i13): (Option<usize>, Option<usize>, Option<usize>, Option<usize>),
    pmi: Option<String>,
) -> Result<()> {
    let kind = run.kind()?;
    let config = run.config(kind)?;
    let pmi = match (pmi, kind) {
        (Some(text), _) => read_pmi(&text)?,
        (None, CodebookKind::Type1SinglePanel) => Pmi::Type1SP(PmiType1SP {
            i11: m1.ok_or_else(|| usage("--m1 is required"))?,
            i12: m2.unwrap_or(0),
            i13,
            i2: vec![n.unwrap_or(0); run.sim.n_3],
        }),
        (None, _) => return Err(usage("--pmi is required for this kind")),
    };
    let antenna = port_antenna(&config, run.sim.antenna);
    let w = decode_report(&pmi, &config, &port_domain(&config), &antenna)?;
    run.write(&render_precoder(&w))
}

fn cmd_encode(run: Run) -> Result<()> {
    let config = run.config(run.kind()?)?;
    let drop = run.channel()?;
    let report = encode_user(
        &drop.dl[0],
        &drop.ul[0],
        &run.params,
        &config,
        &run.sim.antenna,
    )?;
    let bytes = serialize(&report.pmi, &config)?;
    let doc = serde_json::json!({ "pmi": report.pmi, "payload": hex::encode(bytes) });
    run.write(&format!("{doc}\n"))
}

fn cmd_decode(run: Run, payload: &str) -> Result<()> {
    let config = run.config(run.kind()?)?;
    let bytes = hex::decode(payload.trim()).map_err(|e| usage(format!("invalid payload: {e}")))?;
    let pmi = parse(&bytes, &config)?;
    let ports = if run.kind()?.is_port_selection() {
        let drop = run.channel()?;
        port_context(&drop.ul[0], &run.params, &config, &run.sim.antenna)?
    } else {
        PortContext::Antennas
    };
    let w = decode_report(&pmi, &config, &ports, &run.sim.antenna)?;
    run.write(&render_precoder(&w))
}

fn cmd_roundtrip(run: Run) -> Result<()> {
    let config = run.config(run.kind()?)?;
    let drop = run.channel()?;
    let report = encode_user(
        &drop.dl[0],
        &drop.ul[0],
        &run.params,
        &config,
        &run.sim.antenna,
    )?;
    let bytes = serialize(&report.pmi, &config)?;
    let parsed = parse(&bytes, &config)?;
    let w = decode_report(&parsed, &config, &report.ports, &run.sim.antenna)?;
    let (targets, _) = subband_targets(&drop.dl[0], run.rank)?;
    let overhead = overhead_report(&parsed, &config)?;
    let text = format!(
        "kind {}\nparse_identity {}\nnmse {}\nindicator_count {}\nserialized_bits {}\ncomplexity_ops {}\npayload {}\n",
        config.kind(),
        parsed == report.pmi,
        fmt_sig(nmse(&w, &targets)),
        overhead.indicator_count,
        overhead.serialized_bits,
        overhead.complexity_ops,
        hex::encode(&bytes),
    );
    run.write(&text)
}

fn cmd_overhead(run: Run) -> Result<()> {
    let kinds: Vec<CodebookKind> = if run.kinds.is_empty() {
        CodebookKind::ALL
            .into_iter()
            .filter(|k| (*k == CodebookKind::Type1MultiPanel) == (run.sim.antenna.ng > 1))
            .collect()
    } else {
        run.kinds
            .iter()
            .map(|s| CodebookKind::from_name(s).ok_or_else(|| usage(format!("unknown kind {s:?}"))))
            .collect::<Result<_>>()?
    };
    let drop = run.channel()?;
    let mut out = String::from("kind,rank,n_3,indicator_count,serialized_bits,complexity_ops\n");
    for kind in kinds {
        let config = run.config(kind)?;
        let report = encode_user(
            &drop.dl[0],
            &drop.ul[0],
            &run.params,
            &config,
            &run.sim.antenna,
        )?;
        let o = overhead_report(&report.pmi, &config)?;
        out += &format!(
            "{kind},{},{},{},{},{}\n",
            config.rank(),
            config.n_3(),
            o.indicator_count,
            o.serialized_bits,
            o.complexity_ops
        );
    }
    run.write(&out)
}

fn cmd_simulate(run: Run) -> Result<()> {
    let names = if run.kinds.is_empty() {
        vec![
            "genie".into(),
            "type1sp".into(),
            "type2".into(),
            "etype2".into(),
        ]
    } else {
        run.kinds.clone()
    };
    let betas = if run.betas.is_empty() {
        vec![run.params.beta]
    } else {
        run.betas.clone()
    };
    let modes = if run.port_modes.is_empty() {
        vec![run.params.port_mode]
    } else {
        run.port_modes.clone()
    };
    let mut grid = Vec::new();
    for name in &names {
        if name == "genie" {
            grid.push(SchemeSpec::genie());
            continue;
        }
        let kind =
            CodebookKind::from_name(name).ok_or_else(|| usage(format!("unknown kind {name:?}")))?;
        match kind {
            CodebookKind::EType2 | CodebookKind::EType2PortSelection => {
                for &beta in &betas {
                    grid.push(SchemeSpec::codebook(
                        kind,
                        EncoderParams { beta, ..run.params },
                    ));
                }
            }
            CodebookKind::FeType2PortSelection => {
                for &port_mode in &modes {
                    grid.push(SchemeSpec::codebook(
                        kind,
                        EncoderParams {
                            port_mode,
                            ..run.params
                        },
                    ));
                }
            }
            _ => grid.push(SchemeSpec::codebook(kind, run.params)),
        }
    }
    let rows = sweep(&grid, &run.sim)?;
    let mut out = format!("{CSV_HEADER}\n");
    for row in &rows {
        out += &csv_row(row, &run.sim);
        out.push('\n');
    }
    run.write(&out)
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Codeword {
            run,
            m1,
            m2,
            n,
            i13,
            pmi,
        } => cmd_codeword(run.resolve()?, (m1, m2, n, i13), pmi),
        Command::Encode { run } => cmd_encode(run.resolve()?),
        Command::Decode { run, payload } => cmd_decode(run.resolve()?, &payload),
        Command::Roundtrip { run } => cmd_roundtrip(run.resolve()?),
        Command::Overhead { run } => cmd_overhead(run.resolve()?),
        Command::Simulate { run } => cmd_simulate(run.resolve()?),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                CliError::Usage(_) => ExitCode::from(2),
                CliError::Runtime(_) => ExitCode::from(1),
            }
        }
    }
}
