//! Subcommands. Tables go to stdout, JSON documents to `--output`.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use num_bigint::{BigInt, BigUint};
use serde::Serialize;
use thiserror::Error;

use hmnd_core::biometrics::{builtin_modalities, encrypted_match, plaintext_match, score_table};
use hmnd_core::decimal::parse_rational;
use hmnd_core::fath::worked_example;
use hmnd_core::fees::{quote_transaction, FeeBreakdown, PriceQuote, QuoteFixture, DEFAULT_ANNUAL_DECLINE};
use hmnd_core::group_crypto::{keygen, GroupParams, PublicKeyDocument, SecretKeyDocument};
use hmnd_core::lwe_he::{lwe_keygen, LweProfile};
use hmnd_core::netsim::{self, check_invariants, SimConfig};
use hmnd_core::slashing::{period_for, PerpetrationKind};
use hmnd_core::zkp_linear::{prove_linear, verify_linear, LinearProofDocument};
use hmnd_core::{seeded_rng, Rational};

const BUILTIN_QUOTES: &str = include_str!("../../../fixtures/quotes.json");

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("invariant violated: {0}")]
    Invariant(String),
    #[error("{0}")]
    Rejected(String),
}

impl CliError {
    pub fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Invariant(_) => 2,
            CliError::Rejected(_) => 3,
        }
    }
}

fn usage<E: std::fmt::Display>(context: impl std::fmt::Display) -> impl FnOnce(E) -> CliError {
    move |e| CliError::Usage(format!("{context}: {e}"))
}

#[derive(Debug, Parser)]
#[command(name = "hmnd", version, about = "Simulation, pricing and proof tools for a bioauthenticated network")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Common {
    /// Seed for every random draw.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Write the JSON result here instead of printing only the table.
    #[arg(long, short)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run a network scenario and check its event log.
    RunSim {
        /// Scenario JSON file.
        scenario: PathBuf,
        /// Write the event log (newline-delimited JSON) here.
        #[arg(long)]
        events: Option<PathBuf>,
        /// Use the seed stored in the scenario instead of --seed.
        #[arg(long, conflicts_with = "seed")]
        scenario_seed: bool,
        #[command(flatten)]
        common: Common,
    },
    /// Print the three-period supply rebalancing example.
    FathDemo {
        #[command(flatten)]
        common: Common,
    },
    /// Price a transaction in native units.
    FeeQuote {
        /// Stored data in GB (decimal).
        #[arg(long, default_value = "0")]
        size_gb: String,
        /// Number of validators that process and store it.
        #[arg(long, default_value_t = 1)]
        validators: u32,
        /// Provider quote fixture; a bundled one is used when absent.
        #[arg(long)]
        quote: Option<PathBuf>,
        /// Annual decline of storage prices (decimal in (0, 1)).
        #[arg(long, default_value = DEFAULT_ANNUAL_DECLINE)]
        decline: String,
        #[command(flatten)]
        common: Common,
    },
    /// Score the bundled biometric modalities.
    ScoreModalities {
        #[command(flatten)]
        common: Common,
    },
    /// Encrypt inputs, compute a linear combination and prove it.
    ProveLinear {
        /// Public or secret key file from `keygen`.
        #[arg(long)]
        key: PathBuf,
        /// Comma-separated integer inputs.
        #[arg(long, allow_hyphen_values = true)]
        inputs: String,
        /// Comma-separated integer coefficients.
        #[arg(long, allow_hyphen_values = true)]
        coefficients: String,
        #[command(flatten)]
        common: Common,
    },
    /// Check a proof written by `prove-linear`. Rejection exits with 3.
    VerifyLinear {
        #[arg(long)]
        key: PathBuf,
        #[arg(long)]
        proof: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Compare encrypted and plaintext template matching.
    LweMatch {
        #[arg(long, default_value = "test-exhaustive")]
        profile: LweProfile,
        /// Template bits such as 1011; random when absent.
        #[arg(long)]
        template: Option<String>,
        /// Probe bits; random when absent.
        #[arg(long)]
        probe: Option<String>,
        /// Length of random templates.
        #[arg(long, default_value_t = 8)]
        bits: usize,
        /// Minimum inner product for a match.
        #[arg(long)]
        threshold: u64,
        #[command(flatten)]
        common: Common,
    },
    /// Show blacklist periods for repeated offenses of one kind.
    SlashDemo {
        #[arg(long)]
        kind: PerpetrationKind,
        /// Number of offenses to list.
        #[arg(long, default_value_t = 12)]
        repeat: usize,
        #[command(flatten)]
        common: Common,
    },
    /// Generate group parameters and an ElGamal key pair.
    Keygen {
        /// Modulus size; the bundled 64-bit group is used when absent.
        #[arg(long)]
        bits: Option<u64>,
        /// Also write the public half here.
        #[arg(long)]
        public: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
}

fn write_json<T: Serialize>(path: Option<&Path>, value: &T) -> Result<(), CliError> {
    if let Some(path) = path {
        let text = serde_json::to_string_pretty(value).expect("documents serialize") + "\n";
        fs::write(path, text).map_err(usage(path.display()))?;
    }
    Ok(())
}

fn read(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(usage(path.display()))
}

fn parse_ints(text: &str) -> Result<Vec<BigInt>, CliError> {
    text.split(',')
        .map(|s| s.trim().parse::<BigInt>().map_err(usage(format!("bad integer {s:?}"))))
        .collect()
}

fn parse_bits(text: &str) -> Result<Vec<u8>, CliError> {
    text.chars()
        .map(|c| match c {
            '0' => Ok(0),
            '1' => Ok(1),
            _ => Err(CliError::Usage(format!("bit strings use only 0 and 1, got {c:?}"))),
        })
        .collect()
}

pub fn dispatch(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::RunSim { scenario, events, scenario_seed, common } => run_sim(&scenario, events.as_deref(), scenario_seed, &common),
        Command::FathDemo { common } => fath_demo(&common),
        Command::FeeQuote { size_gb, validators, quote, decline, common } => {
            fee_quote(&size_gb, validators, quote.as_deref(), &decline, &common)
        }
        Command::ScoreModalities { common } => score_modalities(&common),
        Command::ProveLinear { key, inputs, coefficients, common } => prove(&key, &inputs, &coefficients, &common),
        Command::VerifyLinear { key, proof, common } => verify(&key, &proof, &common),
        Command::LweMatch { profile, template, probe, bits, threshold, common } => {
            lwe_match(profile, template.as_deref(), probe.as_deref(), bits, threshold, &common)
        }
        Command::SlashDemo { kind, repeat, common } => slash_demo(kind, repeat, &common),
        Command::Keygen { bits, public, common } => key_gen(bits, public.as_deref(), &common),
    }
}

fn run_sim(path: &Path, events: Option<&Path>, scenario_seed: bool, common: &Common) -> Result<(), CliError> {
    let cfg = SimConfig::from_json(&read(path)?).map_err(usage(path.display()))?;
    let seed = if scenario_seed { cfg.seed } else { common.seed };
    let out = netsim::run_with_seed(&cfg, seed).map_err(usage(path.display()))?;
    if let Some(p) = events {
        fs::write(p, out.ndjson()).map_err(usage(p.display()))?;
    }
    write_json(common.output.as_deref(), &out.report)?;
    let r = &out.report;
    println!("scenario        {}", r.scenario);
    println!("seed            {}", r.seed);
    println!("slots           {}", r.slots);
    println!("blocks          {} ({} skipped)", r.blocks_authored, r.slots_skipped);
    println!("fees injected   {}", r.fees_injected);
    println!("paid to nodes   {}", r.fees_paid_to_nodes);
    println!("vault           {}", r.vault_balance);
    println!("supply          {} -> {}", r.initial_supply, r.final_supply);
    println!("rebalances      {}", r.rebalances.len());
    println!("slashes         {}", r.slashes.len());
    println!("events          {} sha256 {}", r.event_count, r.event_log_sha256);
    let violations = check_invariants(&out.events, &cfg);
    for v in &violations {
        eprintln!("{v}");
    }
    match violations.len() {
        0 => Ok(()),
        n => Err(CliError::Invariant(format!("{n} log check(s) failed"))),
    }
}

fn fath_demo(common: &Common) -> Result<(), CliError> {
    let rows = worked_example().map_err(|e| CliError::Invariant(e.to_string()))?;
    println!("{:>4} {:>12} {:>8} {:>7} {:>12} {:>8}", "year", "fees", "kind", "ratio", "supply", "wallet");
    for r in &rows {
        let kind = serde_json::to_value(r.kind).expect("serializes");
        println!(
            "{:>4} {:>12} {:>8} {:>7} {:>12} {:>8}",
            r.year,
            r.fees_paid,
            kind.as_str().unwrap_or_default(),
            format!("{}/{}", r.ratio_num, r.ratio_den),
            r.supply_after,
            r.wallet_after
        );
    }
    let path = |f: fn(&hmnd_core::fath::DemoRow) -> u128| rows.iter().map(|r| f(r).to_string()).collect::<Vec<_>>().join(" -> ");
    println!("supply: {}", path(|r| r.supply_after));
    println!("wallet: {}", path(|r| r.wallet_after));
    write_json(common.output.as_deref(), &rows)
}

fn fee_quote(size_gb: &str, validators: u32, quote: Option<&Path>, decline: &str, common: &Common) -> Result<(), CliError> {
    let text = match quote {
        Some(p) => read(p)?,
        None => BUILTIN_QUOTES.to_string(),
    };
    let fixture = QuoteFixture::from_json(&text).map_err(usage("quote fixture"))?;
    let price: PriceQuote<Rational> = PriceQuote::from_fixture(&fixture).map_err(usage("quote fixture"))?;
    let d = parse_rational(decline).ok_or_else(|| CliError::Usage(format!("--decline: bad decimal {decline:?}")))?;
    let b = quote_transaction(&price, size_gb, validators, &d).map_err(usage("quote"))?;
    println!("validators          {}", b.validators);
    println!("data (GB)           {}", b.data_size_gb);
    println!("computational       {}", FeeBreakdown::format_native(b.computational));
    println!("storage, perpetual  {}", FeeBreakdown::format_native(b.storage_perpetual));
    println!("total               {}", FeeBreakdown::format_native(b.total));
    write_json(common.output.as_deref(), &b)
}

fn score_modalities(common: &Common) -> Result<(), CliError> {
    let report = score_table(&builtin_modalities()).map_err(|e| CliError::Invariant(e.to_string()))?;
    println!("{:>4}  {:<32} {:>5} {:>9}  eligible", "rank", "modality", "score", "published");
    for r in &report.rows {
        let published = r.published_score.map_or("-".to_string(), |p| p.to_string());
        let flag = if r.matches_published == Some(false) { " *" } else { "" };
        println!("{:>4}  {:<32} {:>5} {:>9}  {}{}", r.rank, r.name, r.score, published, if r.eligible { "yes" } else { "no" }, flag);
    }
    let n = report.mismatches().count();
    if n > 0 {
        println!("* {n} computed score(s) differ from the published column");
    }
    write_json(common.output.as_deref(), &report)
}

fn load_public(path: &Path) -> Result<PublicKeyDocument, CliError> {
    let doc: PublicKeyDocument = serde_json::from_str(&read(path)?).map_err(usage(path.display()))?;
    doc.validate().map_err(usage(path.display()))?;
    Ok(doc)
}

fn prove(key: &Path, inputs: &str, coefficients: &str, common: &Common) -> Result<(), CliError> {
    let doc = load_public(key)?;
    let (xs, coeffs) = (parse_ints(inputs)?, parse_ints(coefficients)?);
    let mut rng = seeded_rng(common.seed);
    let randomness: Vec<BigUint> = xs.iter().map(|_| doc.params.random_scalar(&mut rng)).collect();
    let (statement, proof) = prove_linear(&doc.params, &doc.pk, &xs, &randomness, &coeffs, &mut rng).map_err(usage("prove"))?;
    let y: BigInt = coeffs.iter().zip(&xs).map(|(a, x)| a * x).sum();
    println!("y = {y}");
    let document = LinearProofDocument { statement, proof };
    match &common.output {
        Some(_) => write_json(common.output.as_deref(), &document),
        None => {
            println!("{}", serde_json::to_string_pretty(&document).expect("serializes"));
            Ok(())
        }
    }
}

fn verify(key: &Path, proof: &Path, common: &Common) -> Result<(), CliError> {
    let doc = load_public(key)?;
    let document: LinearProofDocument = serde_json::from_str(&read(proof)?).map_err(usage(proof.display()))?;
    let accepted = verify_linear(&doc.params, &doc.pk, &document.statement, &document.proof);
    println!("{}", if accepted { "accept" } else { "reject" });
    write_json(common.output.as_deref(), &serde_json::json!({ "accepted": accepted }))?;
    if accepted {
        Ok(())
    } else {
        Err(CliError::Rejected("proof rejected".into()))
    }
}

#[derive(Serialize)]
struct MatchDocument {
    profile: LweProfile,
    template: String,
    probe: String,
    threshold: u64,
    plaintext_dot: u64,
    encrypted: bool,
    plaintext: bool,
}

fn lwe_match(
    profile: LweProfile,
    template: Option<&str>,
    probe: Option<&str>,
    bits: usize,
    threshold: u64,
    common: &Common,
) -> Result<(), CliError> {
    use rand::Rng;
    let mut rng = seeded_rng(common.seed);
    let mut pick = |given: Option<&str>| match given {
        Some(s) => parse_bits(s),
        None => Ok((0..bits).map(|_| rng.gen_range(0..2u8)).collect()),
    };
    let (t, p) = (pick(template)?, pick(probe)?);
    let params = profile.params();
    let keys = lwe_keygen(&params, &mut rng);
    let encrypted = encrypted_match(&params, &keys, &t, &p, threshold, &mut rng).map_err(usage("lwe-match"))?;
    let plain = plaintext_match(&t, &p, threshold).map_err(usage("lwe-match"))?;
    let show = |v: &[u8]| v.iter().map(|b| char::from(b'0' + b)).collect::<String>();
    let doc = MatchDocument {
        profile,
        template: show(&t),
        probe: show(&p),
        threshold,
        plaintext_dot: t.iter().zip(&p).map(|(a, b)| u64::from(a & b)).sum(),
        encrypted: encrypted.is_match(),
        plaintext: plain.is_match(),
    };
    println!("template   {}", doc.template);
    println!("probe      {}", doc.probe);
    println!("dot        {} (threshold {})", doc.plaintext_dot, threshold);
    println!("encrypted  {}", if doc.encrypted { "match" } else { "no match" });
    println!("plaintext  {}", if doc.plaintext { "match" } else { "no match" });
    write_json(common.output.as_deref(), &doc)?;
    if doc.encrypted != doc.plaintext {
        return Err(CliError::Invariant("encrypted and plaintext decisions differ".into()));
    }
    Ok(())
}

#[derive(Serialize)]
struct SlashRow {
    offense: usize,
    period_months: hmnd_core::slashing::BlacklistPeriod,
}

fn slash_demo(kind: PerpetrationKind, repeat: usize, common: &Common) -> Result<(), CliError> {
    let p = kind.perpetration();
    println!("{kind}: severity {}, {}scalable", p.severity, if p.scalable { "" } else { "not " });
    let effects: Vec<String> = p.effects.iter().map(|e| format!("{e:?}")).collect();
    println!("effects: {}", if effects.is_empty() { "none".to_string() } else { effects.join(", ") });
    let rows: Vec<SlashRow> = (0..repeat).map(|i| SlashRow { offense: i + 1, period_months: period_for(kind, i) }).collect();
    println!("{:>7}  months", "offense");
    for r in &rows {
        println!("{:>7}  {}", r.offense, r.period_months);
    }
    write_json(common.output.as_deref(), &serde_json::json!({ "perpetration": p, "ladder": rows }))
}

fn key_gen(bits: Option<u64>, public: Option<&Path>, common: &Common) -> Result<(), CliError> {
    let mut rng = seeded_rng(common.seed);
    let params = match bits {
        None => GroupParams::test_group(),
        Some(b) => GroupParams::generate(b, &mut rng).map_err(usage("--bits"))?,
    };
    let kp = keygen(&params, &mut rng);
    let public_doc = PublicKeyDocument { params, pk: kp.pk };
    println!("p  = {}", public_doc.params.p());
    println!("q  = {}", public_doc.params.q());
    println!("g  = {}", public_doc.params.g());
    println!("pk = {}", public_doc.pk);
    write_json(public, &public_doc)?;
    write_json(common.output.as_deref(), &SecretKeyDocument { public: public_doc, sk: kp.sk })
}
