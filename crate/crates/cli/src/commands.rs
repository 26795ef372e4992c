use std::time::Instant;

use bates_engine::harness;
use bates_engine::hybrid::{price, NumericalConfig};
use bates_engine::model::{ExerciseStyle, MarketModel, OptionContract, OptionKind};
use bates_engine::montecarlo::{price_american_ls, price_european_mc};
use bates_engine::reference::{carr_madan_price, convergence_ratio, implied_vol, vasicek_bond_factor};
use bates_engine::Error;
use clap::ValueEnum;
use serde_json::{Map, Value};

use crate::config::{RunConfig, SmileAxis};
use crate::output::{flatten_into, json_number, Cell, Csv};
use crate::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Method {
    Htfd,
    Mc,
    Cf,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum TableId {
    T1,
    T2,
    T4,
    T6,
    T7,
}

pub struct Flags {
    pub method: Method,
    pub raw: bool,
    pub dry_run: bool,
    pub timing: bool,
    pub only: Option<String>,
}

/// Command output plus whether every check passed.
pub struct Emitted {
    pub text: String,
    pub ok: bool,
}

impl Emitted {
    fn ok(text: String) -> Self {
        Emitted { text, ok: true }
    }
}

fn method_name(m: Method) -> &'static str {
    match m {
        Method::Htfd => "htfd",
        Method::Mc => "mc",
        Method::Cf => "cf",
    }
}

fn echo(prefix: &str, value: impl serde::Serialize, out: &mut Map<String, Value>) {
    let v = serde_json::to_value(value).expect("config sections serialize");
    flatten_into(prefix, &v, out);
}

pub fn cmd_price(cfg: RunConfig, flags: &Flags) -> Result<Emitted, CliError> {
    let cfg = cfg.checked()?;
    let mut report = Map::new();
    report.insert("command".into(), "price".into());
    report.insert("method".into(), method_name(flags.method).into());
    if flags.method == Method::Cf && cfg.contract.style == ExerciseStyle::American {
        return Err(CliError::Input("method cf prices European contracts only".into()));
    }
    if !flags.dry_run {
        let start = Instant::now();
        match flags.method {
            Method::Htfd => {
                let r = price(&cfg.model, &cfg.contract, &cfg.numerics)?;
                report.insert("price".into(), json_number(r.price, flags.raw));
            }
            Method::Mc => {
                let est = match cfg.contract.style {
                    ExerciseStyle::European => price_european_mc(&cfg.model, &cfg.contract, &cfg.mc)?,
                    ExerciseStyle::American => price_american_ls(&cfg.model, &cfg.contract, &cfg.mc)?,
                };
                report.insert("price".into(), json_number(est.mean, flags.raw));
                report.insert("ci_half_width".into(), json_number(est.half_width, flags.raw));
                report.insert("paths".into(), est.paths.into());
                report.insert("seed".into(), est.seed.into());
                let skipped: Vec<String> = est.skipped_dates.iter().map(|d| d.to_string()).collect();
                report.insert("skipped_dates".into(), skipped.join(";").into());
            }
            Method::Cf => {
                let p = carr_madan_price(&cfg.model, cfg.contract.strike, cfg.contract.maturity, cfg.contract.kind)?;
                report.insert("price".into(), json_number(p, flags.raw));
            }
        }
        if flags.timing {
            report.insert("runtime_ms".into(), (start.elapsed().as_millis() as u64).into());
        }
    }
    echo("model", &cfg.model, &mut report);
    echo("contract", cfg.contract, &mut report);
    match flags.method {
        Method::Htfd => echo("numerics", &cfg.numerics, &mut report),
        Method::Mc => echo("mc", cfg.mc, &mut report),
        Method::Cf => {}
    }
    let text = serde_json::to_string_pretty(&Value::Object(report)).expect("report serializes") + "\n";
    Ok(Emitted::ok(text))
}

const SPOTS: [f64; 5] = [80.0, 90.0, 100.0, 110.0, 120.0];

/// Fixed benchmark prices per spot in `SPOTS` order, by correlation.
type Benchmarks = [(f64, [f64; 5]); 2];

const AMERICAN_PSOR: Benchmarks = [
    (-0.5, [1.1359, 3.3532, 7.5970, 13.8830, 21.7186]),
    (0.5, [1.4843, 3.7145, 7.7027, 13.6722, 21.3653]),
];
const HW_EUROPEAN_MC: Benchmarks = [
    (-0.5, [1.0153, 3.1008, 7.2315, 13.4256, 21.1070]),
    (0.5, [1.3446, 3.7263, 8.0069, 14.1323, 21.6501]),
];
const HW_AMERICAN_MC: Benchmarks = [
    (-0.5, [1.0544, 3.2273, 7.5589, 14.0909, 22.1736]),
    (0.5, [1.3559, 3.7633, 8.1122, 14.3884, 22.2039]),
];

enum Reference {
    Transform,
    Fixed(&'static Benchmarks),
}

struct TableSpec {
    rhos: &'static [f64],
    model: fn(f64) -> MarketModel,
    contract: OptionContract,
    dx: &'static [f64],
    reference: Reference,
}

fn bates_rho(rho: f64) -> MarketModel {
    MarketModel { rho1: rho, ..MarketModel::benchmark_bates() }
}

fn bates_long(rho: f64) -> MarketModel {
    MarketModel { rho1: rho, sigma_y: 0.7, ..MarketModel::benchmark_bates() }
}

fn table_spec(id: TableId) -> TableSpec {
    let call = |t: f64, style| OptionContract::new(100.0, t, OptionKind::Call, style);
    let fine: &'static [f64] = &[0.01, 0.005, 0.0025, 0.00125];
    let coarse: &'static [f64] = &[0.02, 0.01, 0.005, 0.0025];
    match id {
        TableId::T1 => TableSpec {
            rhos: &[-0.5, 0.5],
            model: bates_rho,
            contract: call(0.5, ExerciseStyle::European),
            dx: fine,
            reference: Reference::Transform,
        },
        TableId::T2 => TableSpec {
            rhos: &[-0.5, 0.5],
            model: bates_rho,
            contract: call(0.5, ExerciseStyle::American),
            dx: fine,
            reference: Reference::Fixed(&AMERICAN_PSOR),
        },
        TableId::T4 => TableSpec {
            rhos: &[-0.5],
            model: bates_long,
            contract: call(5.0, ExerciseStyle::European),
            dx: fine,
            reference: Reference::Transform,
        },
        TableId::T6 => TableSpec {
            rhos: &[-0.5, 0.5],
            model: MarketModel::benchmark_bates_hw,
            contract: call(0.5, ExerciseStyle::European),
            dx: coarse,
            reference: Reference::Fixed(&HW_EUROPEAN_MC),
        },
        TableId::T7 => TableSpec {
            rhos: &[-0.5, 0.5],
            model: MarketModel::benchmark_bates_hw,
            contract: call(0.5, ExerciseStyle::American),
            dx: coarse,
            reference: Reference::Fixed(&HW_AMERICAN_MC),
        },
    }
}

fn fixed_reference(table: &Benchmarks, rho: f64, spot: f64) -> Option<f64> {
    let (_, values) = table.iter().find(|(r, _)| *r == rho)?;
    SPOTS.iter().position(|&s| s == spot).map(|i| values[i])
}

pub fn cmd_table(cfg: RunConfig, id: TableId, flags: &Flags) -> Result<Emitted, CliError> {
    cfg.numerics.validate()?;
    let spec = table_spec(id);
    let dxs: Vec<f64> = if cfg.options.dx.is_empty() { spec.dx.to_vec() } else { cfg.options.dx.clone() };
    let spots: Vec<f64> = if cfg.options.spots.is_empty() { SPOTS.to_vec() } else { cfg.options.spots.clone() };
    if let Some(bad) = dxs.iter().chain(&spots).find(|v| !(**v > 0.0 && v.is_finite())) {
        return Err(CliError::Input(format!("table sweep values must be > 0, got {bad}")));
    }
    let mut csv = Csv::new(&["rho", "S0", "dx", "price", "reference", "abs_err"], flags.raw);
    if flags.dry_run {
        return Ok(Emitted::ok(csv.finish()));
    }
    for &rho in spec.rhos {
        for &spot in &spots {
            let model = MarketModel { s0: spot, ..(spec.model)(rho) };
            let reference = match spec.reference {
                Reference::Transform => Some(carr_madan_price(&model, 100.0, spec.contract.maturity, OptionKind::Call)?),
                Reference::Fixed(t) => fixed_reference(t, rho, spot),
            };
            for &dx in &dxs {
                let mut numerics = NumericalConfig { dx, ..cfg.numerics.clone() };
                if numerics.threshold.is_none() {
                    numerics.threshold = NumericalConfig::default_threshold(&model);
                }
                let p = price(&model, &spec.contract, &numerics)?.price;
                csv.row(&[
                    Cell::Num(rho),
                    Cell::Num(spot),
                    Cell::Num(dx),
                    Cell::Num(p),
                    reference.map_or(Cell::Empty, Cell::Num),
                    reference.map_or(Cell::Empty, |r| Cell::Num((p - r).abs())),
                ]);
            }
        }
    }
    Ok(Emitted::ok(csv.finish()))
}

/// Ratio column for a doubling sequence; the first two rows have none.
pub fn ratio_column(prices: &[f64]) -> Result<Vec<Option<f64>>, Error> {
    (0..prices.len())
        .map(|i| if i < 2 { Ok(None) } else { convergence_ratio(prices[i], prices[i - 1], prices[i - 2]).map(Some) })
        .collect()
}

fn check_doubling(steps: &[usize]) -> Result<(), CliError> {
    if steps.len() < 3 {
        return Err(CliError::Input(format!("converge needs at least 3 step counts, got {}", steps.len())));
    }
    if steps[0] == 0 {
        return Err(CliError::Input("step counts must be >= 1".into()));
    }
    if let Some(w) = steps.windows(2).find(|w| w[1] != 2 * w[0]) {
        return Err(CliError::Input(format!("step counts must double: {} then {}", w[0], w[1])));
    }
    Ok(())
}

pub fn cmd_converge(cfg: RunConfig, flags: &Flags) -> Result<Emitted, CliError> {
    let cfg = cfg.checked()?;
    let steps = if cfg.options.steps.is_empty() { vec![100, 200, 400, 800] } else { cfg.options.steps.clone() };
    check_doubling(&steps)?;
    let injected = !cfg.options.prices.is_empty();
    if injected && cfg.options.prices.len() != steps.len() {
        return Err(CliError::Input(format!(
            "{} injected prices for {} step counts",
            cfg.options.prices.len(),
            steps.len()
        )));
    }
    let mut csv = Csv::new(&["N", "price", "ratio"], flags.raw);
    if flags.dry_run {
        return Ok(Emitted::ok(csv.finish()));
    }
    let prices = if injected {
        cfg.options.prices.clone()
    } else {
        steps
            .iter()
            .map(|&n| price(&cfg.model, &cfg.contract, &NumericalConfig { steps: n, ..cfg.numerics.clone() }).map(|r| r.price))
            .collect::<Result<Vec<f64>, Error>>()?
    };
    for ((n, p), ratio) in steps.iter().zip(&prices).zip(ratio_column(&prices)?) {
        csv.row(&[Cell::Int(*n), Cell::Num(*p), ratio.map_or(Cell::Empty, Cell::Num)]);
    }
    Ok(Emitted::ok(csv.finish()))
}

/// Continuously compounded zero rate to `t` implied by the model's discounting.
fn zero_rate(m: &MarketModel, t: f64) -> f64 {
    let factor = if m.sigma_r > 0.0 { vasicek_bond_factor(0.0, 0.0, t, m.kappa_r, m.sigma_r) } else { 1.0 };
    (m.phi_integral(t) - factor.ln()) / t
}

pub fn cmd_smile(cfg: RunConfig, flags: &Flags) -> Result<Emitted, CliError> {
    let cfg = cfg.checked()?;
    let smile = &cfg.options.smile;
    if smile.points.is_empty() {
        return Err(CliError::Input("smile needs at least one point".into()));
    }
    if let Some(bad) = smile.points.iter().find(|v| !(**v > 0.0 && v.is_finite())) {
        return Err(CliError::Input(format!("smile points must be > 0, got {bad}")));
    }
    let axis = match smile.axis {
        SmileAxis::Moneyness => "moneyness",
        SmileAxis::Maturity => "maturity",
    };
    let mut csv = Csv::new(&[axis, "htfd", "hmc", "cf"], flags.raw);
    if flags.dry_run {
        return Ok(Emitted::ok(csv.finish()));
    }
    let m = &cfg.model;
    for &point in &smile.points {
        let (strike, maturity) = match smile.axis {
            SmileAxis::Moneyness => (point * m.s0, cfg.contract.maturity),
            SmileAxis::Maturity => (cfg.contract.strike, point),
        };
        let contract = OptionContract::new(strike, maturity, cfg.contract.kind, ExerciseStyle::European);
        let r = zero_rate(m, maturity);
        let vol = |p: f64| -> Result<Cell, CliError> {
            match implied_vol(p, m.s0, strike, maturity, r, m.delta, contract.kind) {
                Ok(iv) => Ok(Cell::Num(iv.vol)),
                // Monte Carlo noise can leave a price outside the no-arbitrage band
                Err(Error::Arb { .. }) => Ok(Cell::Empty),
                Err(e) => Err(e.into()),
            }
        };
        let htfd = vol(price(m, &contract, &cfg.numerics)?.price)?;
        let hmc = vol(price_european_mc(m, &contract, &cfg.mc)?.mean)?;
        let cf = if m.sigma_r == 0.0 { vol(carr_madan_price(m, strike, maturity, contract.kind)?)? } else { Cell::Empty };
        csv.row(&[Cell::Num(point), htfd, hmc, cf]);
    }
    Ok(Emitted::ok(csv.finish()))
}

pub fn cmd_validate(cfg: RunConfig, flags: &Flags) -> Result<Emitted, CliError> {
    cfg.numerics.validate()?;
    cfg.mc.validate()?;
    let mut csv = Csv::new(&["group", "name", "value", "limit", "pass"], flags.raw);
    if let Some(g) = &flags.only {
        if !harness::GROUPS.contains(&g.as_str()) {
            return Err(CliError::Input(format!("unknown group '{g}', expected one of {}", harness::GROUPS.join(", "))));
        }
    }
    if flags.dry_run {
        return Ok(Emitted::ok(csv.finish()));
    }
    let checks = harness::run(&cfg.model, &cfg.contract, &cfg.numerics, &cfg.mc, flags.only.as_deref())?;
    let ok = checks.iter().all(|c| c.pass);
    for c in &checks {
        csv.row(&[
            Cell::Text(c.group.into()),
            Cell::Text(c.name.into()),
            Cell::Num(c.value),
            Cell::Num(c.limit),
            Cell::Text(if c.pass { "PASS" } else { "FAIL" }.into()),
        ]);
    }
    Ok(Emitted { text: csv.finish(), ok })
}
