mod bench;

use std::fs::{self, File};
use std::io::{BufReader, BufWriter};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use puzzle_core::analysis::{self, AppendixReport};
use puzzle_core::container::{random_iv, MIN_IV_LEN};
use puzzle_core::params::compute_block_size;
use puzzle_core::{
    CipherParams, ContainerHeader, Granularity, HashAlg, KeyPair, MapMethod, PuzzleError,
};

const EXIT_USAGE: u8 = 2;
const EXIT_FORMAT: u8 = 3;
const EXIT_IO: u8 = 4;
const EXIT_THRESHOLD: u8 = 5;

const PASSWORD_ENV: &str = "PUZZLE_PASSWORD";

#[derive(Parser)]
#[command(name = "puzzle", version, about = "Keyed transposition cipher")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Encrypt a file into a container
    Encrypt(CryptArgs),
    /// Decrypt a container
    Decrypt(CryptArgs),
    /// Show the parameters a password derives, without key material
    Keyinfo(KeyinfoArgs),
    /// Reproduce the nonlinearity and uniformity measurements
    Stats(StatsArgs),
    /// Measure encryption throughput for both map methods
    Bench(bench::BenchArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum GranularityArg {
    Byte,
    Bit,
}

impl From<GranularityArg> for Granularity {
    fn from(g: GranularityArg) -> Self {
        match g {
            GranularityArg::Byte => Granularity::Byte,
            GranularityArg::Bit => Granularity::Bit,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum HashArg {
    Sha256,
    Sha512,
}

impl From<HashArg> for HashAlg {
    fn from(h: HashArg) -> Self {
        match h {
            HashArg::Sha256 => HashAlg::Sha256,
            HashArg::Sha512 => HashAlg::Sha512,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Unfolding,
    Iteration,
}

impl From<MethodArg> for MapMethod {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Unfolding => MapMethod::Unfolding,
            MethodArg::Iteration => MapMethod::Iteration,
        }
    }
}

/// Parameters that must match between encryption and decryption.
#[derive(Args)]
struct CipherOpts {
    /// Reference block size R, in elements (bytes or bits)
    #[arg(long, default_value_t = 4096)]
    ref_block_size: usize,
    #[arg(long, value_enum, default_value = "byte")]
    granularity: GranularityArg,
    /// Hash for key derivation (decryption reads it from the container)
    #[arg(long, value_enum, default_value = "sha512")]
    hash: HashArg,
    /// Force a map method instead of choosing by block size
    #[arg(long, value_enum)]
    method: Option<MethodArg>,
}

impl CipherOpts {
    fn params(&self) -> CipherParams {
        let p = CipherParams::new(self.ref_block_size, self.granularity.into(), self.hash.into());
        match self.method {
            Some(m) => p.with_method(m.into()),
            None => p,
        }
    }
}

#[derive(Args)]
struct PasswordOpts {
    /// Read the password from this file (first line)
    #[arg(long, value_name = "PATH")]
    password_file: Option<PathBuf>,
    /// Read the password from this environment variable
    #[arg(long, value_name = "VAR", default_value = PASSWORD_ENV)]
    password_env: String,
}

#[derive(Args)]
struct CryptArgs {
    input: PathBuf,
    output: PathBuf,
    #[command(flatten)]
    cipher: CipherOpts,
    #[command(flatten)]
    password: PasswordOpts,
    /// Fixed IV in hex, for reproducible test vectors only
    #[arg(long, hide = true)]
    iv_hex: Option<String>,
}

#[derive(Args)]
struct KeyinfoArgs {
    /// Take the IV, hash and granularity from this container's header
    #[arg(long, value_name = "PATH")]
    container: Option<PathBuf>,
    #[command(flatten)]
    cipher: CipherOpts,
    #[command(flatten)]
    password: PasswordOpts,
}

#[derive(Args)]
struct StatsArgs {
    /// Number of random keys
    #[arg(long, default_value_t = 100)]
    trials: usize,
    #[arg(long, default_value_t = 10_000)]
    block_size: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Directory for appendix1..5.csv and summary.jsonl
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
}

/// A failure carrying its process exit code.
struct Failure {
    code: u8,
    error: anyhow::Error,
}

impl Failure {
    fn usage(error: impl Into<anyhow::Error>) -> Self {
        Failure { code: EXIT_USAGE, error: error.into() }
    }

    fn io(error: impl Into<anyhow::Error>) -> Self {
        Failure { code: EXIT_IO, error: error.into() }
    }
}

impl From<PuzzleError> for Failure {
    fn from(e: PuzzleError) -> Self {
        let code = match &e {
            PuzzleError::InvalidArgument(_) => EXIT_USAGE,
            PuzzleError::Format(_) => EXIT_FORMAT,
            PuzzleError::Io { .. } => EXIT_IO,
            PuzzleError::Internal(_) => 1,
        };
        Failure { code, error: e.into() }
    }
}

type CmdResult = Result<(), Failure>;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(EXIT_USAGE) } else { ExitCode::SUCCESS };
        }
    };
    let result = match cli.command {
        Command::Encrypt(a) => encrypt(a),
        Command::Decrypt(a) => decrypt(a),
        Command::Keyinfo(a) => keyinfo(a),
        Command::Stats(a) => stats(a),
        Command::Bench(a) => bench::run(a).map_err(|error| Failure { code: 1, error }),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            ExitCode::from(f.code)
        }
    }
}

fn read_password(opts: &PasswordOpts, confirm: bool) -> Result<Vec<u8>, Failure> {
    let pw = if let Some(path) = &opts.password_file {
        let text = fs::read(path).with_context(|| format!("reading password file {}", path.display())).map_err(Failure::io)?;
        let line = text.split(|&b| b == b'\n').next().unwrap_or_default();
        line.strip_suffix(b"\r").unwrap_or(line).to_vec()
    } else if let Some(v) = std::env::var_os(&opts.password_env) {
        v.into_encoded_bytes()
    } else {
        let first = rpassword::prompt_password("Password: ").context("reading password").map_err(Failure::io)?;
        if confirm {
            let again = rpassword::prompt_password("Confirm password: ").context("reading password").map_err(Failure::io)?;
            if again != first {
                return Err(Failure::usage(anyhow!("passwords do not match")));
            }
        }
        first.into_bytes()
    };
    if pw.is_empty() {
        return Err(Failure::usage(anyhow!("password must not be empty")));
    }
    Ok(pw)
}

fn open_input(path: &Path) -> Result<File, Failure> {
    if !path.is_file() {
        return Err(Failure::usage(anyhow!("input {} does not exist or is not a file", path.display())));
    }
    File::open(path).with_context(|| format!("opening {}", path.display())).map_err(Failure::io)
}

fn create_output(path: &Path) -> Result<BufWriter<File>, Failure> {
    File::create(path)
        .map(BufWriter::new)
        .with_context(|| format!("creating {}", path.display()))
        .map_err(Failure::io)
}

fn report_throughput(verb: &str, bytes: u64, blocks: u64, start: Instant) {
    let secs = start.elapsed().as_secs_f64();
    let mbps = bytes as f64 / 1e6 / secs.max(1e-9);
    eprintln!("{verb} {bytes} bytes in {blocks} blocks, {secs:.3} s ({mbps:.1} MB/s)");
}

fn encrypt(args: CryptArgs) -> CmdResult {
    let params = args.cipher.params();
    params.validate()?;
    let input = open_input(&args.input)?;
    let len = input.metadata().map_err(Failure::io)?.len();
    let iv = match &args.iv_hex {
        Some(h) => {
            let iv = hex::decode(h).context("--iv-hex").map_err(Failure::usage)?;
            if iv.len() < MIN_IV_LEN {
                return Err(Failure::usage(anyhow!("IV must be at least {MIN_IV_LEN} bytes")));
            }
            iv
        }
        None => random_iv()?,
    };
    let password = read_password(&args.password, true)?;
    let output = create_output(&args.output)?;
    let start = Instant::now();
    let summary = puzzle_core::encrypt_stream(BufReader::new(input), len, output, &password, &iv, &params)
        .inspect_err(|_| discard(&args.output))?;
    report_throughput("encrypted", summary.plaintext_len, summary.blocks, start);
    Ok(())
}

fn decrypt(args: CryptArgs) -> CmdResult {
    if args.iv_hex.is_some() {
        return Err(Failure::usage(anyhow!("--iv-hex applies to encryption only")));
    }
    let params = args.cipher.params();
    let input = open_input(&args.input)?;
    let password = read_password(&args.password, false)?;
    let output = create_output(&args.output)?;
    let start = Instant::now();
    let summary = puzzle_core::decrypt_stream(BufReader::new(input), output, &password, &params)
        .inspect_err(|_| discard(&args.output))?;
    report_throughput("decrypted", summary.plaintext_len, summary.blocks, start);
    Ok(())
}

/// Partial output from a failed run is never useful; drop it.
fn discard(path: &Path) {
    let _ = fs::remove_file(path);
}

fn keyinfo(args: KeyinfoArgs) -> CmdResult {
    let mut params = args.cipher.params();
    let iv = match &args.container {
        Some(path) => {
            let header = ContainerHeader::read_from(BufReader::new(open_input(path)?))?;
            params.hash_alg = header.hash_alg;
            params.granularity = header.granularity;
            Some(header.iv)
        }
        None => None,
    };
    params.validate()?;
    let password = read_password(&args.password, false)?;
    let keys = puzzle_core::keyschedule::derive_key_pair(&password, params.hash_alg)?;
    let keys: KeyPair = match &iv {
        Some(iv) => puzzle_core::keyschedule::apply_iv(&keys, iv, params.hash_alg)?,
        None => keys,
    };
    let block_size = compute_block_size(&params, &keys.map_key)?;
    let key_bits = keys.xor_key.len() as u64 * 8;
    let unit = match params.granularity {
        Granularity::Byte => "bytes",
        Granularity::Bit => "bits",
    };
    println!("hash:               {}", params.hash_alg);
    println!("granularity:        {:?}", params.granularity);
    println!("iv:                 {}", if iv.is_some() { "from container" } else { "none" });
    println!("reference size R:   {} {unit}", params.reference_block_size);
    println!("block size:         {block_size} {unit}");
    println!("map method:         {}", params.method_for(block_size));
    println!("key length:         {key_bits} bits (x2 keys)");
    println!("log10 keyspace:     {:.2}", analysis::log10_keyspace(key_bits));
    println!("log10 block perms:  {:.2}", analysis::log10_permutations(block_size as u64));
    Ok(())
}

fn stats(args: StatsArgs) -> CmdResult {
    if args.trials == 0 {
        return Err(Failure::usage(anyhow!("--trials must be at least 1")));
    }
    if args.block_size < 2 {
        return Err(Failure::usage(anyhow!("--block-size must be at least 2")));
    }
    fs::create_dir_all(&args.out_dir)
        .with_context(|| format!("creating {}", args.out_dir.display()))
        .map_err(Failure::io)?;
    let start = Instant::now();
    let report = AppendixReport::run(args.seed, args.trials, args.block_size)?;
    log::info!("{} trials in {:.2} s", args.trials, start.elapsed().as_secs_f64());

    for index in 1..=5 {
        let path = args.out_dir.join(format!("appendix{index}.csv"));
        let out = create_output(&path)?;
        report
            .write_csv(index, out)
            .with_context(|| format!("writing {}", path.display()))
            .map_err(Failure::io)?;
    }
    let lines = report.summary();
    let path = args.out_dir.join("summary.jsonl");
    let mut out = create_output(&path)?;
    analysis::write_summary(&lines, &mut out)
        .with_context(|| format!("writing {}", path.display()))
        .map_err(Failure::io)?;

    let mut failed = 0;
    for l in &lines {
        let verdict = match l.pass {
            Some(true) => "pass",
            Some(false) => {
                failed += 1;
                "FAIL"
            }
            None => "info",
        };
        println!("{:<4} {:<44} {:>12.5}  {}", verdict, l.metric, l.value, l.threshold);
    }
    if failed > 0 {
        return Err(Failure { code: EXIT_THRESHOLD, error: anyhow!("{failed} threshold(s) not met") });
    }
    Ok(())
}
