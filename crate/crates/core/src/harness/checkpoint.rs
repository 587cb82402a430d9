use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::baselines::MamlInit;
use crate::chn::{Chn, ChnParams};
use crate::data::FeatureKind;
use crate::error::{Error, Result};
use crate::numerics::{Activation, Dense, Matrix, Mlp, Parameters};
use crate::pvae::{HeadParams, Link, PvaeModel, PvaeParams};

/// Which object a checkpoint holds.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CheckpointKind {
    Pvae,
    Chn,
    Maml,
}

impl CheckpointKind {
    fn tag(self) -> &'static str {
        match self {
            CheckpointKind::Pvae => "PVAE",
            CheckpointKind::Chn => "CHN",
            CheckpointKind::Maml => "MAML",
        }
    }
}

const VERSION: &str = "v1";

/// One named tensor of a checkpoint.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

/// Writes `KIND-CKPT v1` followed by `name rows cols` blocks, one line per
/// row, every value with 17 significant digits.
pub fn write_tensors(path: &Path, kind: CheckpointKind, tensors: &[Tensor]) -> Result<()> {
    let mut out = format!("{}-CKPT {VERSION}\n", kind.tag());
    for t in tensors {
        writeln!(out, "{} {} {}", t.name, t.rows, t.cols).unwrap();
        for r in 0..t.rows {
            let row = &t.data[r * t.cols..(r + 1) * t.cols];
            let line: Vec<String> = row.iter().map(|v| format!("{v:.16e}")).collect();
            writeln!(out, "{}", line.join(" ")).unwrap();
        }
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

pub fn read_tensors(path: &Path, kind: CheckpointKind) -> Result<Vec<Tensor>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let loc = |line: usize| format!("{}:{line}", path.display());
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
    let (_, header) = lines
        .next()
        .ok_or_else(|| Error::data(loc(1), "empty checkpoint"))?;
    let (found, version) = header
        .split_once(' ')
        .and_then(|(k, v)| k.strip_suffix("-CKPT").map(|k| (k, v)))
        .ok_or_else(|| Error::data(loc(1), format!("not a checkpoint header: {header:?}")))?;
    if found != kind.tag() {
        return Err(Error::data(
            loc(1),
            format!("expected a {} checkpoint, found {found}", kind.tag()),
        ));
    }
    if version != VERSION {
        return Err(Error::data(loc(1), format!("unsupported checkpoint version {version}")));
    }
    let mut tensors = Vec::new();
    while let Some((n, line)) = lines.next() {
        if line.trim().is_empty() {
            continue;
        }
        let parts: Vec<&str> = line.split_whitespace().collect();
        let bad_header = || Error::data(loc(n), format!("malformed tensor header {line:?}"));
        if parts.len() != 3 {
            return Err(bad_header());
        }
        let rows: usize = parts[1].parse().map_err(|_| bad_header())?;
        let cols: usize = parts[2].parse().map_err(|_| bad_header())?;
        let name = parts[0].to_string();
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            let (m, row) = lines.next().ok_or_else(|| {
                Error::data(
                    loc(n),
                    format!("tensor {name} is incomplete: {r} of {rows} rows present"),
                )
            })?;
            let vals = row
                .split_whitespace()
                .map(str::parse::<f64>)
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| Error::data(loc(m), format!("tensor {name}: {e}")))?;
            if vals.len() != cols {
                return Err(Error::data(
                    loc(m),
                    format!("tensor {name} row has {} values, expected {cols}", vals.len()),
                ));
            }
            data.extend(vals);
        }
        tensors.push(Tensor { name, rows, cols, data });
    }
    Ok(tensors)
}

fn collect<P: Parameters + ?Sized>(p: &P) -> Vec<Tensor> {
    let mut out = Vec::new();
    p.visit(&mut |name, rows, cols, data| {
        out.push(Tensor {
            name: name.to_string(),
            rows,
            cols,
            data: data.to_vec(),
        })
    });
    out
}

fn scalar(name: &str, v: f64) -> Tensor {
    Tensor {
        name: name.into(),
        rows: 1,
        cols: 1,
        data: vec![v],
    }
}

struct TensorMap {
    path: String,
    map: HashMap<String, Tensor>,
}

impl TensorMap {
    fn new(path: &Path, tensors: Vec<Tensor>) -> Result<Self> {
        let mut map = HashMap::new();
        for t in tensors {
            let name = t.name.clone();
            if map.insert(name.clone(), t).is_some() {
                return Err(Error::data(path.display().to_string(), format!("tensor {name} appears twice")));
            }
        }
        Ok(Self {
            path: path.display().to_string(),
            map,
        })
    }

    fn missing(&self, name: &str) -> Error {
        Error::data(self.path.clone(), format!("missing tensor {name}"))
    }

    fn take(&mut self, name: &str) -> Result<Tensor> {
        self.map.remove(name).ok_or_else(|| self.missing(name))
    }

    fn take_scalar(&mut self, name: &str) -> Result<f64> {
        let t = self.take(name)?;
        match t.data.as_slice() {
            [v] => Ok(*v),
            _ => Err(Error::data(self.path.clone(), format!("tensor {name} must be 1x1"))),
        }
    }

    fn take_mlp(&mut self, prefix: &str, act: Activation) -> Result<Option<Mlp>> {
        let mut layers = Vec::new();
        loop {
            let wname = format!("{prefix}.layer{}.weight", layers.len());
            let Some(w) = self.map.remove(&wname) else { break };
            let b = self.take(&format!("{prefix}.layer{}.bias", layers.len()))?;
            layers.push(Dense {
                weight: Matrix::from_vec(w.rows, w.cols, w.data)?,
                bias: b.data,
            });
        }
        if layers.is_empty() {
            return Ok(None);
        }
        Mlp::from_layers(layers, act)
            .map(Some)
            .map_err(|e| Error::data(self.path.clone(), format!("{prefix}: {e}")))
    }

    fn require_mlp(&mut self, prefix: &str, act: Activation) -> Result<Mlp> {
        self.take_mlp(prefix, act)?
            .ok_or_else(|| self.missing(&format!("{prefix}.layer0.weight")))
    }

    fn finish(self) -> Result<()> {
        match self.map.keys().min() {
            Some(extra) => Err(Error::data(self.path, format!("unexpected tensor {extra}"))),
            None => Ok(()),
        }
    }
}

pub fn save_pvae(model: &PvaeModel, path: &Path) -> Result<()> {
    let mut tensors = collect(model.params());
    let kinds = model
        .kinds()
        .iter()
        .map(|k| f64::from(u8::from(*k == FeatureKind::Binary)))
        .collect::<Vec<_>>();
    tensors.push(Tensor {
        name: "binary_kinds".into(),
        rows: 1,
        cols: kinds.len(),
        data: kinds,
    });
    tensors.push(scalar("output_variance", model.output_variance()));
    tensors.push(scalar("frozen", f64::from(u8::from(model.is_frozen()))));
    write_tensors(path, CheckpointKind::Pvae, &tensors)
}

pub fn load_pvae(path: &Path) -> Result<PvaeModel> {
    let mut m = TensorMap::new(path, read_tensors(path, CheckpointKind::Pvae)?)?;
    let kinds: Vec<FeatureKind> = m
        .take("binary_kinds")?
        .data
        .iter()
        .map(|&v| if v == 1.0 { FeatureKind::Binary } else { FeatureKind::Continuous })
        .collect();
    let variance = m.take_scalar("output_variance")?;
    let frozen = m.take_scalar("frozen")? == 1.0;
    let e = m.take("embeddings")?;
    let embeddings = Matrix::from_vec(e.rows, e.cols, e.data)?;
    let point_net = m.require_mlp("point_net", Activation::Tanh)?;
    let encoder = m.require_mlp("encoder", Activation::Identity)?;
    let decoder = m.require_mlp("decoder", Activation::Tanh)?;
    let mut heads = BTreeMap::new();
    for f in 0..kinds.len() {
        let Ok(w) = m.take(&format!("head{f}.w")) else { continue };
        let b = m.take_scalar(&format!("head{f}.b"))?;
        heads.insert(
            f,
            HeadParams {
                w: w.data,
                b,
                link: Link::for_kind(kinds[f]),
            },
        );
    }
    m.finish()?;
    let params = PvaeParams {
        embeddings,
        point_net,
        encoder,
        decoder,
        heads,
    };
    let mut model = PvaeModel::from_params(params, kinds, variance)
        .map_err(|e| Error::data(path.display().to_string(), e.to_string()))?;
    if frozen {
        model.freeze();
    }
    Ok(model)
}

pub fn save_chn(chn: &Chn, path: &Path) -> Result<()> {
    write_tensors(path, CheckpointKind::Chn, &collect(chn.params()))
}

pub fn load_chn(path: &Path) -> Result<Chn> {
    let mut m = TensorMap::new(path, read_tensors(path, CheckpointKind::Chn)?)?;
    let params = ChnParams {
        point_net: m.require_mlp("point_net", Activation::Tanh)?,
        context_net: m.require_mlp("context_net", Activation::Identity)?,
        meta_net: m.take_mlp("meta_net", Activation::Identity)?,
        pred_net: m.require_mlp("pred_net", Activation::Identity)?,
    };
    m.finish()?;
    let latent = params.point_net.input_dim() - 1;
    Chn::from_params(params, latent).map_err(|e| Error::data(path.display().to_string(), e.to_string()))
}

pub fn save_maml(init: &MamlInit, path: &Path) -> Result<()> {
    let tensors = vec![
        Tensor {
            name: "w".into(),
            rows: 1,
            cols: init.w.len(),
            data: init.w.clone(),
        },
        scalar("b", init.b),
        scalar("inner_lr", init.inner_lr),
        scalar("outer_lr", init.outer_lr),
        scalar("inner_steps", init.inner_steps as f64),
        scalar("meta_batch", init.meta_batch as f64),
    ];
    write_tensors(path, CheckpointKind::Maml, &tensors)
}

pub fn load_maml(path: &Path) -> Result<MamlInit> {
    let mut m = TensorMap::new(path, read_tensors(path, CheckpointKind::Maml)?)?;
    let init = MamlInit {
        w: m.take("w")?.data,
        b: m.take_scalar("b")?,
        inner_lr: m.take_scalar("inner_lr")?,
        outer_lr: m.take_scalar("outer_lr")?,
        inner_steps: m.take_scalar("inner_steps")? as usize,
        meta_batch: m.take_scalar("meta_batch")? as usize,
    };
    m.finish()?;
    Ok(init)
}
