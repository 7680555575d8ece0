//! Parsing of `--truth` specifications such as `one-on-f:A=10,alpha=0.75,c=3`.

use std::collections::BTreeMap;
use std::str::FromStr;

use noisespec::OneOnFParams;

#[derive(Debug, Clone, PartialEq)]
pub enum TruthSpec {
    /// Fixed hyperparameters, or a draw from the configured hyperprior.
    OneOnF(Option<OneOnFParams>),
    /// A draw from the configured GP prior; `seed` decouples it from the data seed.
    Gp {
        seed: Option<u64>,
    },
    Constant(f64),
}

fn parse_pairs(text: &str) -> Result<BTreeMap<String, String>, String> {
    let mut out = BTreeMap::new();
    for part in text.split(',').filter(|p| !p.trim().is_empty()) {
        let (k, v) = part
            .split_once('=')
            .ok_or_else(|| format!("expected key=value, got `{part}`"))?;
        if out.insert(k.trim().to_string(), v.trim().to_string()).is_some() {
            return Err(format!("key `{}` given twice", k.trim()));
        }
    }
    Ok(out)
}

fn take<T: FromStr>(pairs: &mut BTreeMap<String, String>, key: &str) -> Result<Option<T>, String> {
    pairs
        .remove(key)
        .map(|v| v.parse::<T>().map_err(|_| format!("cannot parse {key}=`{v}`")))
        .transpose()
}

fn reject_rest(pairs: &BTreeMap<String, String>, kind: &str) -> Result<(), String> {
    match pairs.keys().next() {
        Some(k) => Err(format!("unknown key `{k}` for truth `{kind}`")),
        None => Ok(()),
    }
}

impl FromStr for TruthSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (kind, rest) = s.split_once(':').unwrap_or((s, ""));
        let mut pairs = parse_pairs(rest)?;
        match kind.trim() {
            "one-on-f" => {
                let a = take::<f64>(&mut pairs, "A")?;
                let alpha = take::<f64>(&mut pairs, "alpha")?;
                let c = take::<f64>(&mut pairs, "c")?;
                reject_rest(&pairs, kind)?;
                match (a, alpha, c) {
                    (None, None, None) => Ok(TruthSpec::OneOnF(None)),
                    (Some(a), Some(alpha), Some(c)) => OneOnFParams::new(a, alpha, c)
                        .map(|p| TruthSpec::OneOnF(Some(p)))
                        .map_err(|e| e.to_string()),
                    _ => Err("one-on-f needs all of A, alpha and c, or none of them".into()),
                }
            }
            "gp" => {
                let seed = take::<u64>(&mut pairs, "seed")?;
                reject_rest(&pairs, kind)?;
                Ok(TruthSpec::Gp { seed })
            }
            "constant" => {
                let value = take::<f64>(&mut pairs, "S")?.ok_or("constant needs S=<value>")?;
                reject_rest(&pairs, kind)?;
                if !(value.is_finite() && value >= 0.0) {
                    return Err(format!("constant spectrum must be finite and >= 0, got {value}"));
                }
                Ok(TruthSpec::Constant(value))
            }
            other => Err(format!("unknown truth kind `{other}` (one-on-f, gp, constant)")),
        }
    }
}
