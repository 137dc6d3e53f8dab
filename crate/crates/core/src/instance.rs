//! JSON instance files and seeded random boxes.
//!
//! Schema: `{"boxes": [{"name": "optional", "a": [..3], "b": [..3]}]}`.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::bounds::{classify_case, normalize, CaseId, OmegaBox, RawBox};
use crate::error::Error;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoxSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub a: [f64; 3],
    pub b: [f64; 3],
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct InstanceFile {
    pub boxes: Vec<BoxSpec>,
}

/// A validated box together with its display name.
#[derive(Clone, Debug, PartialEq)]
pub struct NamedBox {
    pub name: String,
    pub raw: RawBox,
    pub omega: OmegaBox,
}

#[derive(Debug)]
pub enum InstanceError {
    Parse(serde_json::Error),
    Box {
        index: usize,
        name: String,
        source: Error,
    },
}

impl fmt::Display for InstanceError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            InstanceError::Parse(e) => write!(f, "cannot parse instance file: {e}"),
            InstanceError::Box {
                index,
                name,
                source,
            } => {
                write!(f, "box #{index} ({name}): {source}")
            }
        }
    }
}

impl std::error::Error for InstanceError {}

fn display_name(index: usize, spec: &BoxSpec) -> String {
    spec.name.clone().unwrap_or_else(|| format!("box{index}"))
}

impl InstanceFile {
    pub fn from_json(text: &str) -> Result<Self, InstanceError> {
        serde_json::from_str(text).map_err(InstanceError::Parse)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("plain data serializes");
        s.push('\n');
        s
    }

    /// Validate every box, naming the first offender.
    pub fn validate(&self) -> Result<Vec<NamedBox>, InstanceError> {
        self.boxes
            .iter()
            .enumerate()
            .map(|(index, spec)| {
                let name = display_name(index, spec);
                match RawBox::new(spec.a, spec.b) {
                    Ok(raw) => Ok(NamedBox {
                        omega: normalize(&raw),
                        raw,
                        name,
                    }),
                    Err(source) => Err(InstanceError::Box {
                        index,
                        name,
                        source,
                    }),
                }
            })
            .collect()
    }
}

/// Generator for the `index`-th box of a seeded stream. Each index has its own
/// ChaCha stream, so boxes can be regenerated individually.
fn box_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng
}

fn draw_interval(rng: &mut ChaCha8Rng, max: f64) -> (f64, f64) {
    loop {
        let u = rng.gen_range(0.0..=max);
        let v = rng.gen_range(0.0..=max);
        if u != v {
            return (u.min(v), u.max(v));
        }
    }
}

/// The `index`-th random box: bounds uniform on `[0, max]`, each coordinate
/// sorted, no Ω relabeling. With `case`, draws are rejected until the Ω form of
/// the box falls in that case.
pub fn random_box(seed: u64, index: usize, max: f64, case: Option<CaseId>) -> RawBox {
    let mut rng = box_rng(seed, index);
    loop {
        let mut a = [0.0; 3];
        let mut b = [0.0; 3];
        for i in 0..3 {
            (a[i], b[i]) = draw_interval(&mut rng, max);
        }
        let raw = RawBox::new(a, b).expect("drawn intervals are strict");
        match case {
            Some(want) if classify_case(&normalize(&raw)) != want => continue,
            _ => return raw,
        }
    }
}

pub fn generate(count: usize, seed: u64, max: f64, case: Option<CaseId>) -> InstanceFile {
    let boxes = (0..count)
        .map(|i| {
            let raw = random_box(seed, i, max, case);
            BoxSpec {
                name: Some(format!("box{i}")),
                a: raw.lower(),
                b: raw.upper(),
            }
        })
        .collect();
    InstanceFile { boxes }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generation_is_deterministic() {
        let x = generate(5, 7, 10.0, None).to_json();
        let y = generate(5, 7, 10.0, None).to_json();
        assert_eq!(x, y);
        assert_ne!(x, generate(5, 8, 10.0, None).to_json());
    }

    #[test]
    fn boxes_are_independent_of_count() {
        let short = generate(2, 3, 1.0, None);
        let long = generate(10, 3, 1.0, None);
        assert_eq!(short.boxes[..], long.boxes[..2]);
    }

    #[test]
    fn forced_case_is_respected() {
        for case in [CaseId::Case1, CaseId::Case2] {
            for b in generate(20, 1, 1.0, Some(case)).validate().unwrap() {
                assert_eq!(classify_case(&b.omega), case);
            }
        }
    }

    #[test]
    fn validation_names_offender() {
        let f = InstanceFile::from_json(
            r#"{"boxes":[{"a":[0,0,0],"b":[1,1,1]},{"name":"flat","a":[0,0,0],"b":[1,1,0]}]}"#,
        )
        .unwrap();
        let err = f.validate().unwrap_err();
        assert!(err.to_string().contains("box #1 (flat)"), "{err}");
    }

    #[test]
    fn wrong_arity_is_a_parse_error() {
        assert!(matches!(
            InstanceFile::from_json(r#"{"boxes":[{"a":[0,0],"b":[1,1,1]}]}"#),
            Err(InstanceError::Parse(_))
        ));
    }
}
