//! Plain-text checkpoints.
//!
//! ```text
//! samro-mlp 1
//! widths 344 256 64 32 1
//! hidden softplus
//! output identity
//! weight 0
//! <row 0 values>
//! ...
//! bias 0
//! <values>
//! ...
//! ```
//!
//! Values are written with Rust's shortest round-trip float formatting, so a
//! save/load cycle is bit-exact. Adam states use the same layer blocks after a
//! `samro-adam 1` header carrying the optimizer constants and step count.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use ndarray::{Array1, Array2};

use super::adam::{AdamConfig, AdamState};
use super::mlp::{Activation, Dense, Mlp};
use crate::error::{Error, Result};

const MLP_MAGIC: &str = "samro-mlp 1";
const ADAM_MAGIC: &str = "samro-adam 1";

fn write_row<'a>(out: &mut String, values: impl Iterator<Item = &'a f64>) {
    let mut first = true;
    for v in values {
        if !first {
            out.push(' ');
        }
        first = false;
        write!(out, "{v:?}").expect("write to string");
    }
    out.push('\n');
}

fn write_layers(out: &mut String, layers: &[Dense]) {
    for (i, l) in layers.iter().enumerate() {
        writeln!(out, "weight {i}").expect("write to string");
        for row in l.weight.rows() {
            write_row(out, row.iter());
        }
        writeln!(out, "bias {i}").expect("write to string");
        write_row(out, l.bias.iter());
    }
}

fn widths_of(layers: &[Dense]) -> Vec<usize> {
    let mut w = vec![layers[0].input_dim()];
    w.extend(layers.iter().map(Dense::output_dim));
    w
}

pub fn mlp_to_string(model: &Mlp) -> String {
    let mut out = String::new();
    out.push_str(MLP_MAGIC);
    out.push('\n');
    let widths: Vec<String> = model.widths().iter().map(|w| w.to_string()).collect();
    writeln!(out, "widths {}", widths.join(" ")).expect("write to string");
    writeln!(out, "hidden {}", model.hidden_activation().name()).expect("write to string");
    writeln!(out, "output {}", model.output_activation().name()).expect("write to string");
    write_layers(&mut out, model.layers());
    out
}

struct Lines<'a> {
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
}

impl<'a> Lines<'a> {
    fn new(text: &'a str) -> Self {
        Lines {
            inner: text.lines().enumerate(),
        }
    }

    fn next_line(&mut self) -> Result<(usize, &'a str)> {
        for (no, line) in self.inner.by_ref() {
            if !line.trim().is_empty() {
                return Ok((no + 1, line.trim()));
            }
        }
        Err(Error::Parse("unexpected end of checkpoint".into()))
    }

    fn expect_key(&mut self, key: &str) -> Result<&'a str> {
        let (no, line) = self.next_line()?;
        line.strip_prefix(key)
            .map(str::trim)
            .ok_or_else(|| Error::Parse(format!("line {no}: expected `{key}`, found `{line}`")))
    }

    fn floats(&mut self, expected: usize) -> Result<Vec<f64>> {
        let (no, line) = self.next_line()?;
        let values: std::result::Result<Vec<f64>, _> =
            line.split_whitespace().map(str::parse::<f64>).collect();
        let values = values.map_err(|e| Error::Parse(format!("line {no}: {e}")))?;
        if values.len() != expected {
            return Err(Error::Parse(format!(
                "line {no}: expected {expected} values, found {}",
                values.len()
            )));
        }
        Ok(values)
    }
}

fn parse_usizes(s: &str) -> Result<Vec<usize>> {
    s.split_whitespace()
        .map(|t| {
            t.parse::<usize>()
                .map_err(|e| Error::Parse(format!("bad width `{t}`: {e}")))
        })
        .collect()
}

fn read_layers(lines: &mut Lines<'_>, widths: &[usize]) -> Result<Vec<Dense>> {
    let mut layers = Vec::with_capacity(widths.len() - 1);
    for (i, w) in widths.windows(2).enumerate() {
        lines.expect_key(&format!("weight {i}"))?;
        let mut weight = Array2::zeros((w[1], w[0]));
        for r in 0..w[1] {
            let row = lines.floats(w[0])?;
            weight.row_mut(r).assign(&Array1::from(row));
        }
        lines.expect_key(&format!("bias {i}"))?;
        let bias = Array1::from(lines.floats(w[1])?);
        layers.push(Dense { weight, bias });
    }
    Ok(layers)
}

pub fn mlp_from_str(text: &str) -> Result<Mlp> {
    let mut lines = Lines::new(text);
    let (_, magic) = lines.next_line()?;
    if magic != MLP_MAGIC {
        return Err(Error::Parse(format!(
            "not an MLP checkpoint (header `{magic}`)"
        )));
    }
    let widths = parse_usizes(lines.expect_key("widths")?)?;
    if widths.len() < 2 {
        return Err(Error::Parse("checkpoint needs at least two widths".into()));
    }
    let hidden = Activation::from_name(lines.expect_key("hidden")?)?;
    let output = Activation::from_name(lines.expect_key("output")?)?;
    let layers = read_layers(&mut lines, &widths)?;
    Mlp::from_layers(layers, hidden, output)
}

pub fn adam_to_string(state: &AdamState) -> String {
    let mut out = String::new();
    out.push_str(ADAM_MAGIC);
    out.push('\n');
    let c = &state.config;
    writeln!(
        out,
        "config {:?} {:?} {:?} {:?}",
        c.lr, c.beta1, c.beta2, c.eps
    )
    .expect("write");
    writeln!(out, "step {}", state.step).expect("write");
    let widths: Vec<String> = widths_of(&state.first)
        .iter()
        .map(|w| w.to_string())
        .collect();
    writeln!(out, "widths {}", widths.join(" ")).expect("write");
    out.push_str("first\n");
    write_layers(&mut out, &state.first);
    out.push_str("second\n");
    write_layers(&mut out, &state.second);
    out
}

pub fn adam_from_str(text: &str) -> Result<AdamState> {
    let mut lines = Lines::new(text);
    let (_, magic) = lines.next_line()?;
    if magic != ADAM_MAGIC {
        return Err(Error::Parse(format!(
            "not an Adam checkpoint (header `{magic}`)"
        )));
    }
    let cfg: std::result::Result<Vec<f64>, _> = lines
        .expect_key("config")?
        .split_whitespace()
        .map(str::parse::<f64>)
        .collect();
    let cfg = cfg.map_err(|e| Error::Parse(format!("adam config: {e}")))?;
    if cfg.len() != 4 {
        return Err(Error::Parse("adam config needs lr beta1 beta2 eps".into()));
    }
    let step = lines
        .expect_key("step")?
        .parse::<u64>()
        .map_err(|e| Error::Parse(format!("adam step: {e}")))?;
    let widths = parse_usizes(lines.expect_key("widths")?)?;
    lines.expect_key("first")?;
    let first = read_layers(&mut lines, &widths)?;
    lines.expect_key("second")?;
    let second = read_layers(&mut lines, &widths)?;
    Ok(AdamState {
        config: AdamConfig {
            lr: cfg[0],
            beta1: cfg[1],
            beta2: cfg[2],
            eps: cfg[3],
        },
        step,
        first,
        second,
    })
}

pub fn save_mlp(model: &Mlp, path: &Path) -> Result<()> {
    fs::write(path, mlp_to_string(model))?;
    Ok(())
}

pub fn load_mlp(path: &Path) -> Result<Mlp> {
    mlp_from_str(&fs::read_to_string(path)?)
}

pub fn save_adam(state: &AdamState, path: &Path) -> Result<()> {
    fs::write(path, adam_to_string(state))?;
    Ok(())
}

pub fn load_adam(path: &Path) -> Result<AdamState> {
    adam_from_str(&fs::read_to_string(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::Gradients;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn mlp_text_round_trip_is_bit_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let m = Mlp::new(
            &[5, 7, 3, 1],
            Activation::Softplus,
            Activation::Identity,
            &mut rng,
        )
        .unwrap();
        let back = mlp_from_str(&mlp_to_string(&m)).unwrap();
        let a: Vec<u64> = m.flatten().iter().map(|v| v.to_bits()).collect();
        let b: Vec<u64> = back.flatten().iter().map(|v| v.to_bits()).collect();
        assert_eq!(a, b);
        assert_eq!(back.widths(), m.widths());
        assert_eq!(back.hidden_activation(), Activation::Softplus);
    }

    #[test]
    fn adam_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut m = Mlp::new(&[2, 3, 1], Activation::Relu, Activation::Identity, &mut rng).unwrap();
        let mut adam = AdamState::new(&m, AdamConfig::with_lr(0.002));
        let mut g = Gradients::zeros_like(&m);
        g.layers[0].weight.fill(0.3);
        adam.step(&mut m, &g).unwrap();
        let back = adam_from_str(&adam_to_string(&adam)).unwrap();
        assert_eq!(back, adam);
    }

    #[test]
    fn truncated_checkpoint_is_rejected() {
        let m = Mlp::zeros(&[2, 2], Activation::Relu, Activation::Identity).unwrap();
        let text = mlp_to_string(&m);
        let cut = &text[..text.len() / 2];
        assert!(mlp_from_str(cut).is_err());
    }
}
