//! `qpdesign`: batch front end over the same request schemas as the HTTP
//! service. Every subcommand builds a JSON request from `--input` and/or
//! flags, runs it, and writes JSON or CSV.
//!
//! Exit status: 0 on success, 2 on bad input, 3 on a domain error, 1 on an
//! internal fault.

use std::fs;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use qpdesign::Progress;
use qpdesign_service::api::{self, ApiError, Defaults, Endpoint, ErrorCode};
use qpdesign_service::{init_threads, parse_grid, ServeConfig};
use serde_json::{json, Map, Value};

#[derive(Parser)]
#[command(name = "qpdesign", version, about = "Delayed-feedback root assignment for single-delay equations")]
struct Cli {
    /// Worker threads for parallel grids and subdivisions (default: all cores)
    #[arg(long, global = true, env = "QPDESIGN_THREADS")]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Args)]
struct Io {
    /// JSON request document; flags override its fields
    #[arg(long, short)]
    input: Option<PathBuf>,

    /// Write the result here instead of stdout
    #[arg(long, short)]
    output: Option<PathBuf>,

    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
}

/// A quasipolynomial given by flags; coefficient lists are lowest degree first.
#[derive(Args)]
struct QArgs {
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    m: Option<usize>,
    /// a₀,…,a_{n-1}
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    a: Option<Vec<f64>>,
    /// b₀,…,b_m
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    b: Option<Vec<f64>>,
    #[arg(long)]
    tau: Option<f64>,
}

#[derive(Subcommand)]
enum Command {
    /// Root of maximal multiplicity n+m+1 at s0, all coefficients free
    #[command(allow_negative_numbers = true)]
    GenericMid {
        #[command(flatten)]
        io: Io,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        m: Option<usize>,
        #[arg(long)]
        tau: Option<f64>,
        #[arg(long)]
        s0: Option<f64>,
    },
    /// n+m+1 prescribed real roots, all coefficients free
    #[command(allow_negative_numbers = true)]
    GenericCrrid {
        #[command(flatten)]
        io: Io,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        m: Option<usize>,
        #[arg(long)]
        tau: Option<f64>,
        /// Comma-separated real roots (any order)
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        roots: Option<Vec<f64>>,
    },
    /// Root of multiplicity m+2 with fixed plant a; give either --tau or --s0
    #[command(allow_negative_numbers = true)]
    ControlMid {
        #[command(flatten)]
        io: Io,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        m: Option<usize>,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        a: Option<Vec<f64>>,
        #[arg(long, conflicts_with = "s0")]
        tau: Option<f64>,
        #[arg(long)]
        s0: Option<f64>,
        /// Left end of the s0 search window when --tau is given
        #[arg(long)]
        s0_min: Option<f64>,
        /// Right end of the τ search window when --s0 is given
        #[arg(long)]
        tau_max: Option<f64>,
    },
    /// Zero-level curve of the admissibility residual on [s0_min,0]×[0,tau_max]
    #[command(allow_negative_numbers = true)]
    Admissibility {
        #[command(flatten)]
        io: Io,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        m: Option<usize>,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        a: Option<Vec<f64>>,
        #[arg(long)]
        s0_min: Option<f64>,
        #[arg(long)]
        tau_max: Option<f64>,
        /// Grid size, e.g. 400x400
        #[arg(long, value_parser = parse_grid)]
        grid: Option<[usize; 2]>,
    },
    /// All zeros in a rectangle, optionally certifying dominance of --s0
    #[command(allow_negative_numbers = true)]
    Roots {
        #[command(flatten)]
        io: Io,
        #[command(flatten)]
        q: QArgs,
        /// x_min,x_max,y_min,y_max
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        rect: Option<Vec<f64>>,
        #[arg(long)]
        s0: Option<f64>,
    },
    /// Zeros at the delays τ + kε for k = -K…K
    #[command(allow_negative_numbers = true)]
    Sensitivity {
        #[command(flatten)]
        io: Io,
        #[command(flatten)]
        q: QArgs,
        #[arg(long)]
        epsilon: Option<f64>,
        #[arg(long = "k", short = 'K')]
        k: Option<usize>,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        rect: Option<Vec<f64>>,
    },
    /// Explicit Euler simulation on [-τ, T]
    #[command(allow_negative_numbers = true)]
    Simulate {
        #[command(flatten)]
        io: Io,
        #[command(flatten)]
        q: QArgs,
        /// constant:C | polynomial:c0,c1,… | exponential:A,gamma | trigonometric:A,omega,phi
        #[arg(long, allow_hyphen_values = true)]
        ic: Option<String>,
        /// Final time T
        #[arg(long = "t-end", short = 'T')]
        t_end: Option<f64>,
        /// Steps per delay interval
        #[arg(long)]
        steps: Option<usize>,
    },
    /// Design, spectrum, dominance check and optional simulation in one document
    Report {
        #[command(flatten)]
        io: Io,
    },
    /// Run the HTTP service
    Serve {
        #[command(flatten)]
        config: ServeConfig,
    },
}

struct Failure {
    code: i32,
    message: String,
}

impl From<ApiError> for Failure {
    fn from(e: ApiError) -> Self {
        Failure {
            code: e.code.exit_code(),
            message: serde_json::to_string(&e).unwrap_or_else(|_| e.to_string()),
        }
    }
}

fn bad_input(message: impl Into<String>) -> Failure {
    ApiError::bad_input(message).into()
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    init_threads(cli.threads);
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("{}", f.message);
            ExitCode::from(f.code as u8)
        }
    }
}

fn load(io: &Io) -> Result<Map<String, Value>, Failure> {
    let Some(path) = &io.input else {
        return Ok(Map::new());
    };
    let text = fs::read_to_string(path).map_err(|e| bad_input(format!("{}: {e}", path.display())))?;
    match serde_json::from_str(&text) {
        Ok(Value::Object(map)) => Ok(map),
        Ok(_) => Err(bad_input("request document must be a JSON object")),
        Err(e) => Err(bad_input(format!("{}: {e}", path.display()))),
    }
}

fn set<T: Into<Value>>(body: &mut Map<String, Value>, key: &str, value: Option<T>) {
    if let Some(v) = value {
        body.insert(key.to_owned(), v.into());
    }
}

fn set_q(body: &mut Map<String, Value>, q: QArgs) {
    let mut obj = match body.remove("q") {
        Some(Value::Object(m)) => m,
        _ => Map::new(),
    };
    set(&mut obj, "n", q.n);
    set(&mut obj, "m", q.m);
    set(&mut obj, "a", q.a);
    set(&mut obj, "b", q.b);
    set(&mut obj, "tau", q.tau);
    body.insert("q".into(), Value::Object(obj));
}

fn set_rect(body: &mut Map<String, Value>, rect: Option<Vec<f64>>) -> Result<(), Failure> {
    if let Some(r) = rect {
        let [x_min, x_max, y_min, y_max] = r[..] else {
            return Err(bad_input("--rect takes x_min,x_max,y_min,y_max"));
        };
        body.insert(
            "rect".into(),
            json!({"x_min": x_min, "x_max": x_max, "y_min": y_min, "y_max": y_max}),
        );
    }
    Ok(())
}

fn parse_ic(spec: &str) -> Result<Value, Failure> {
    if spec.trim_start().starts_with('{') {
        return serde_json::from_str(spec).map_err(|e| bad_input(format!("--ic: {e}")));
    }
    let (kind, args) = spec.split_once(':').unwrap_or((spec, ""));
    let nums: Vec<f64> = args
        .split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|s| s.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|e| bad_input(format!("--ic: {e}")))?;
    let v = match (kind, nums.as_slice()) {
        ("constant", [c]) => json!({"constant": {"c": c}}),
        ("polynomial", cs) if !cs.is_empty() => json!({"polynomial": {"coeffs": cs}}),
        ("exponential", [a, g]) => json!({"exponential": {"A": a, "gamma": g}}),
        ("trigonometric", [a, w, p]) => json!({"trigonometric": {"A": a, "omega": w, "phi": p}}),
        _ => return Err(bad_input(format!("--ic: cannot read {spec:?}"))),
    };
    Ok(v)
}

fn run(command: Command) -> Result<(), Failure> {
    let (endpoint, io, body) = match command {
        Command::Serve { config } => {
            let rt = tokio::runtime::Runtime::new().map_err(|e| Failure {
                code: 1,
                message: e.to_string(),
            })?;
            tracing_subscriber::fmt()
                .with_env_filter(
                    tracing_subscriber::EnvFilter::try_from_default_env()
                        .unwrap_or_else(|_| "info".into()),
                )
                .init();
            return rt.block_on(qpdesign_service::serve(config)).map_err(|e| Failure {
                code: 1,
                message: e.to_string(),
            });
        }
        Command::GenericMid { io, n, m, tau, s0 } => {
            let mut body = load(&io)?;
            set(&mut body, "n", n);
            set(&mut body, "m", m);
            set(&mut body, "tau", tau);
            set(&mut body, "s0", s0);
            (Endpoint::GenericMid, io, body)
        }
        Command::GenericCrrid { io, n, m, tau, roots } => {
            let mut body = load(&io)?;
            set(&mut body, "n", n);
            set(&mut body, "m", m);
            set(&mut body, "tau", tau);
            set(&mut body, "roots", roots);
            (Endpoint::GenericCrrid, io, body)
        }
        Command::ControlMid {
            io,
            n,
            m,
            a,
            tau,
            s0,
            s0_min,
            tau_max,
        } => {
            let mut body = load(&io)?;
            set(&mut body, "n", n);
            set(&mut body, "m", m);
            set(&mut body, "a", a);
            if let Some(tau) = tau {
                body.insert("given".into(), json!({"tau": tau}));
            }
            if let Some(s0) = s0 {
                body.insert("given".into(), json!({"s0": s0}));
            }
            if s0_min.is_some() || tau_max.is_some() {
                let mut window = match body.remove("window") {
                    Some(Value::Object(w)) => w,
                    _ => Map::new(),
                };
                set(&mut window, "s0_min", s0_min);
                set(&mut window, "tau_max", tau_max);
                body.insert("window".into(), Value::Object(window));
            }
            (Endpoint::ControlMid, io, body)
        }
        Command::Admissibility {
            io,
            n,
            m,
            a,
            s0_min,
            tau_max,
            grid,
        } => {
            let mut body = load(&io)?;
            set(&mut body, "n", n);
            set(&mut body, "m", m);
            set(&mut body, "a", a);
            set(&mut body, "s0_min", s0_min);
            set(&mut body, "tau_max", tau_max);
            set(&mut body, "grid", grid);
            (Endpoint::Admissibility, io, body)
        }
        Command::Roots { io, q, rect, s0 } => {
            let mut body = load(&io)?;
            set_q(&mut body, q);
            set_rect(&mut body, rect)?;
            set(&mut body, "s0", s0);
            (Endpoint::Roots, io, body)
        }
        Command::Sensitivity {
            io,
            q,
            epsilon,
            k,
            rect,
        } => {
            let mut body = load(&io)?;
            set_q(&mut body, q);
            set(&mut body, "epsilon", epsilon);
            if let Some(k) = k {
                body.remove("k");
                body.insert("K".into(), json!(k));
            }
            set_rect(&mut body, rect)?;
            (Endpoint::Sensitivity, io, body)
        }
        Command::Simulate {
            io,
            q,
            ic,
            t_end,
            steps,
        } => {
            let mut body = load(&io)?;
            set_q(&mut body, q);
            if let Some(spec) = ic {
                body.insert("ic".into(), parse_ic(&spec)?);
            }
            if let Some(t) = t_end {
                body.remove("t_end");
                body.insert("T".into(), json!(t));
            }
            set(&mut body, "steps", steps);
            (Endpoint::Simulate, io, body)
        }
        Command::Report { io } => {
            if io.input.is_none() {
                return Err(bad_input("report needs --input"));
            }
            let body = load(&io)?;
            (Endpoint::Report, io, body)
        }
    };

    let mut body = Value::Object(body);
    // Deadlines only make sense for the server.
    api::take_deadline(&mut body)?;
    let output = api::handle(endpoint, body, &Defaults::default(), &Progress::new())?;
    let text = match io.format {
        Format::Json => {
            let mut s = serde_json::to_string_pretty(&output.to_json()).expect("serializable");
            s.push('\n');
            s
        }
        Format::Csv => output.to_csv().ok_or_else(|| Failure {
            code: ErrorCode::BadInput.exit_code(),
            message: "csv output is available for roots, sensitivity, simulate and admissibility".into(),
        })?,
    };
    match &io.output {
        Some(path) => fs::write(path, text).map_err(|e| Failure {
            code: 1,
            message: format!("{}: {e}", path.display()),
        }),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes())
                .and_then(|_| out.flush())
                .map_err(|e| Failure {
                    code: 1,
                    message: e.to_string(),
                })
        }
    }
}
