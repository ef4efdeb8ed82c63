//! Parameter grids shared by the sweep routines and the command line.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Scale {
    Linear,
    Log,
}

impl FromStr for Scale {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "lin" | "linear" => Ok(Scale::Linear),
            "log" => Ok(Scale::Log),
            other => Err(Error::Grid(format!("unknown scale '{other}' (expected lin or log)"))),
        }
    }
}

impl fmt::Display for Scale {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scale::Linear => "lin",
            Scale::Log => "log",
        })
    }
}

/// A one-dimensional grid: either `min:max:points[:scale]` or an explicit list.
#[derive(Clone, Debug, PartialEq)]
pub enum GridSpec {
    Range {
        min: f64,
        max: f64,
        points: usize,
        scale: Scale,
    },
    List(Vec<f64>),
}

impl GridSpec {
    pub fn range(min: f64, max: f64, points: usize, scale: Scale) -> Self {
        GridSpec::Range {
            min,
            max,
            points,
            scale,
        }
    }

    pub fn single(value: f64) -> Self {
        GridSpec::List(vec![value])
    }

    /// Expands the grid into its points, in ascending parameter order for ranges.
    pub fn values(&self) -> Result<Vec<f64>> {
        match *self {
            GridSpec::List(ref v) => {
                if v.is_empty() {
                    return Err(Error::Grid("empty value list".into()));
                }
                if let Some(bad) = v.iter().find(|x| !x.is_finite()) {
                    return Err(Error::Grid(format!("non-finite grid value {bad}")));
                }
                Ok(v.clone())
            }
            GridSpec::Range {
                min,
                max,
                points,
                scale,
            } => {
                if points == 0 {
                    return Err(Error::Grid("grid has zero points".into()));
                }
                if !min.is_finite() || !max.is_finite() {
                    return Err(Error::Grid(format!("non-finite bounds {min}..{max}")));
                }
                if max < min {
                    return Err(Error::Grid(format!("max {max} below min {min}")));
                }
                match scale {
                    Scale::Linear => Ok(linspace(min, max, points)),
                    Scale::Log => {
                        if min <= 0.0 {
                            return Err(Error::Grid(format!(
                                "log grid needs positive bounds, got min {min}"
                            )));
                        }
                        Ok(logspace(min, max, points))
                    }
                }
            }
        }
    }
}

impl FromStr for GridSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.is_empty() {
            return Err(Error::Grid("empty grid".into()));
        }
        let parse = |t: &str| {
            t.trim()
                .parse::<f64>()
                .map_err(|_| Error::Grid(format!("malformed number '{}'", t.trim())))
        };
        if s.contains(':') {
            let parts: Vec<&str> = s.split(':').collect();
            if !(3..=4).contains(&parts.len()) {
                return Err(Error::Grid(format!(
                    "range '{s}' must be min:max:points[:scale]"
                )));
            }
            let points = parts[2]
                .trim()
                .parse::<usize>()
                .map_err(|_| Error::Grid(format!("malformed point count '{}'", parts[2])))?;
            let scale = match parts.get(3) {
                Some(t) => t.parse()?,
                None => Scale::Linear,
            };
            let grid = GridSpec::range(parse(parts[0])?, parse(parts[1])?, points, scale);
            grid.values()?;
            Ok(grid)
        } else {
            let v = s.split(',').map(parse).collect::<Result<Vec<_>>>()?;
            let grid = GridSpec::List(v);
            grid.values()?;
            Ok(grid)
        }
    }
}

impl fmt::Display for GridSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GridSpec::Range {
                min,
                max,
                points,
                scale,
            } => write!(f, "{min:?}:{max:?}:{points}:{scale}"),
            GridSpec::List(v) => {
                for (i, x) in v.iter().enumerate() {
                    if i > 0 {
                        f.write_str(",")?;
                    }
                    write!(f, "{x:?}")?;
                }
                Ok(())
            }
        }
    }
}

pub fn linspace(min: f64, max: f64, points: usize) -> Vec<f64> {
    match points {
        0 => vec![],
        1 => vec![min],
        _ => {
            let step = (max - min) / (points - 1) as f64;
            (0..points)
                .map(|i| if i + 1 == points { max } else { min + step * i as f64 })
                .collect()
        }
    }
}

pub fn logspace(min: f64, max: f64, points: usize) -> Vec<f64> {
    let (lo, hi) = (min.ln(), max.ln());
    linspace(lo, hi, points)
        .into_iter()
        .enumerate()
        .map(|(i, x)| match i {
            0 => min,
            _ if i + 1 == points => max,
            _ => x.exp(),
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_ranges_and_lists() {
        let g: GridSpec = "0.1:1000:5:log".parse().unwrap();
        let v = g.values().unwrap();
        assert_eq!(v.len(), 5);
        assert_eq!(v[0], 0.1);
        assert_eq!(v[4], 1000.0);
        assert!((v[2] - 10.0).abs() < 1e-12);

        let g: GridSpec = "1, 2,3".parse().unwrap();
        assert_eq!(g.values().unwrap(), vec![1.0, 2.0, 3.0]);
        assert_eq!(g.to_string(), "1.0,2.0,3.0");
    }

    #[test]
    fn rejects_bad_grids() {
        assert!("".parse::<GridSpec>().is_err());
        assert!("1:2:0".parse::<GridSpec>().is_err());
        assert!("0:2:3:log".parse::<GridSpec>().is_err());
        assert!("1:x:3".parse::<GridSpec>().is_err());
        assert!("3:1:3".parse::<GridSpec>().is_err());
        assert!("1:2:3:cubic".parse::<GridSpec>().is_err());
    }

    #[test]
    fn display_round_trips() {
        let g = GridSpec::range(0.1, 1570.0, 200, Scale::Log);
        let back: GridSpec = g.to_string().parse().unwrap();
        assert_eq!(back, g);
    }
}
