//! `key = value` training configuration files. `#` starts a comment.

use std::path::Path;

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::labels::NUM_CLASSES;
use crate::network::TrainConfig;

fn bad(line: usize, msg: impl std::fmt::Display) -> Error {
    Error::InvalidConfig(format!("line {line}: {msg}"))
}

fn number<T: std::str::FromStr>(line: usize, key: &str, v: &str) -> Result<T> {
    v.parse().map_err(|_| bad(line, format!("{key}: cannot parse {v:?}")))
}

/// Unset keys keep their defaults. The result is validated.
pub fn parse_train_config(text: &str) -> Result<TrainConfig> {
    let mut c = TrainConfig::default();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let (key, value) = content
            .split_once('=')
            .ok_or_else(|| bad(line, format!("expected key = value, got {content:?}")))?;
        let (key, v) = (key.trim(), value.trim());
        match key {
            "learning_rate" => c.learning_rate = number(line, key, v)?,
            "adam_beta1" => c.adam_beta1 = number(line, key, v)?,
            "adam_beta2" => c.adam_beta2 = number(line, key, v)?,
            "adam_epsilon" => c.adam_epsilon = number(line, key, v)?,
            "gradient_clip" => c.gradient_clip = number(line, key, v)?,
            "batch_size" => c.batch_size = number(line, key, v)?,
            "early_stop_window" => c.early_stop_window = number(line, key, v)?,
            "validation_interval" => c.validation_interval = number(line, key, v)?,
            "input_noise_sigma" => c.input_noise_sigma = number(line, key, v)?,
            "seed" => c.seed = number(line, key, v)?,
            "max_batches" => {
                c.max_batches = match v {
                    "none" | "" => None,
                    _ => Some(number(line, key, v)?),
                }
            }
            "class_weights" => {
                let parts: Vec<f64> = v
                    .split(',')
                    .map(|p| number(line, key, p.trim()))
                    .collect::<Result<_>>()?;
                c.class_weights = parts
                    .try_into()
                    .map_err(|p: Vec<f64>| bad(line, format!("class_weights needs {NUM_CLASSES} values, got {}", p.len())))?;
            }
            "execution" => {
                c.execution = match v {
                    "parallel" => Execution::Parallel,
                    "sequential" => Execution::Sequential,
                    _ => return Err(bad(line, format!("execution must be parallel or sequential, got {v:?}"))),
                }
            }
            _ => return Err(bad(line, format!("unknown key {key:?}"))),
        }
    }
    c.validate()?;
    Ok(c)
}

pub fn read_train_config(path: &Path) -> Result<TrainConfig> {
    parse_train_config(&std::fs::read_to_string(path)?)
}

/// Inverse of [`parse_train_config`].
pub fn format_train_config(c: &TrainConfig) -> String {
    let weights: Vec<String> = c.class_weights.iter().map(|w| w.to_string()).collect();
    let max = c.max_batches.map_or("none".to_string(), |m| m.to_string());
    let exec = match c.execution {
        Execution::Parallel => "parallel",
        Execution::Sequential => "sequential",
    };
    format!(
        "learning_rate = {}\nadam_beta1 = {}\nadam_beta2 = {}\nadam_epsilon = {}\ngradient_clip = {}\nbatch_size = {}\n\
         early_stop_window = {}\nvalidation_interval = {}\nclass_weights = {}\ninput_noise_sigma = {}\nseed = {}\n\
         max_batches = {max}\nexecution = {exec}\n",
        c.learning_rate,
        c.adam_beta1,
        c.adam_beta2,
        c.adam_epsilon,
        c.gradient_clip,
        c.batch_size,
        c.early_stop_window,
        c.validation_interval,
        weights.join(","),
        c.input_noise_sigma,
        c.seed,
    )
}
