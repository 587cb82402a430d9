use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Every way of producing a head for a new feature.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum MethodId {
    Chn,
    Random,
    MeanImpute,
    MeanHead,
    MeanHeadMatching,
    Knn(usize),
    TrainFromRandom(usize),
    Maml(usize),
    ChnThenFinetune(usize),
}

impl MethodId {
    pub fn needs_chn(self) -> bool {
        matches!(self, MethodId::Chn | MethodId::ChnThenFinetune(_))
    }

    pub fn needs_maml(self) -> bool {
        matches!(self, MethodId::Maml(_))
    }

    pub fn needs_metadata(self) -> bool {
        matches!(self, MethodId::MeanHeadMatching)
    }
}

impl fmt::Display for MethodId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MethodId::Chn => write!(f, "chn"),
            MethodId::Random => write!(f, "random"),
            MethodId::MeanImpute => write!(f, "mean_impute"),
            MethodId::MeanHead => write!(f, "mean_head"),
            MethodId::MeanHeadMatching => write!(f, "mean_head_matching"),
            MethodId::Knn(k) => write!(f, "knn:{k}"),
            MethodId::TrainFromRandom(e) => write!(f, "train_from_random:{e}"),
            MethodId::Maml(e) => write!(f, "maml:{e}"),
            MethodId::ChnThenFinetune(e) => write!(f, "chn_then_finetune:{e}"),
        }
    }
}

impl FromStr for MethodId {
    type Err = Error;

    /// Parameterised methods take `name:N`; without `:N` they use the
    /// defaults knn 10, train_from_random 10, maml 0, chn_then_finetune 10.
    fn from_str(s: &str) -> Result<Self> {
        let (name, arg) = match s.trim().split_once(':') {
            Some((n, a)) => {
                let v: usize = a
                    .parse()
                    .map_err(|_| Error::invalid(format!("bad parameter in method {s:?}")))?;
                (n, Some(v))
            }
            None => (s.trim(), None),
        };
        let plain = |m: MethodId| match arg {
            None => Ok(m),
            Some(_) => Err(Error::invalid(format!("method {name} takes no parameter"))),
        };
        match name {
            "chn" => plain(MethodId::Chn),
            "random" => plain(MethodId::Random),
            "mean_impute" => plain(MethodId::MeanImpute),
            "mean_head" => plain(MethodId::MeanHead),
            "mean_head_matching" => plain(MethodId::MeanHeadMatching),
            "knn" => match arg.unwrap_or(10) {
                0 => Err(Error::invalid("knn needs k >= 1")),
                k => Ok(MethodId::Knn(k)),
            },
            "train_from_random" => Ok(MethodId::TrainFromRandom(arg.unwrap_or(10))),
            "maml" => Ok(MethodId::Maml(arg.unwrap_or(0))),
            "chn_then_finetune" => Ok(MethodId::ChnThenFinetune(arg.unwrap_or(10))),
            _ => Err(Error::invalid(format!("unknown method {s:?}"))),
        }
    }
}

/// Parses a comma-separated method list.
pub fn parse_methods(s: &str) -> Result<Vec<MethodId>> {
    let methods: Vec<MethodId> = s
        .split(',')
        .filter(|p| !p.trim().is_empty())
        .map(str::parse)
        .collect::<Result<_>>()?;
    if methods.is_empty() {
        return Err(Error::invalid("no methods given"));
    }
    Ok(methods)
}
