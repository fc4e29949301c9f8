//! Fixed 256-entry colormap so overlay renders are bit-exact.
//!
//! The default is a piecewise-linear jet-style table
//! (blue -> cyan -> green -> yellow -> red) shipped as `assets/jet.csv`,
//! 256 lines of `r,g,b`. Custom tables in the same format can be loaded.

use std::path::Path;
use std::sync::OnceLock;

use crate::error::{Error, Result};

#[derive(Clone, Debug)]
pub struct Colormap {
    table: [[u8; 3]; 256],
}

const JET_CSV: &str = include_str!("../../assets/jet.csv");

impl Colormap {
    /// The built-in jet-style table.
    pub fn jet() -> &'static Colormap {
        static JET: OnceLock<Colormap> = OnceLock::new();
        JET.get_or_init(|| Colormap::parse(JET_CSV).expect("embedded colormap is valid"))
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Colormap> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Colormap::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Colormap> {
        let mut table = [[0u8; 3]; 256];
        let mut count = 0;
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if count >= 256 {
                return Err(Error::Config("colormap has more than 256 entries".into()));
            }
            let mut parts = line.split(',');
            for c in 0..3 {
                let field = parts
                    .next()
                    .ok_or_else(|| Error::Config(format!("colormap line {}: expected r,g,b", lineno + 1)))?;
                table[count][c] = field.trim().parse().map_err(|_| {
                    Error::Config(format!("colormap line {}: bad component {field:?}", lineno + 1))
                })?;
            }
            if parts.next().is_some() {
                return Err(Error::Config(format!(
                    "colormap line {}: too many fields",
                    lineno + 1
                )));
            }
            count += 1;
        }
        if count != 256 {
            return Err(Error::Config(format!("colormap has {count} entries, expected 256")));
        }
        Ok(Colormap { table })
    }

    /// Maps a value in `[0, 1]` (clamped) to an RGB triple.
    pub fn lookup(&self, v: f32) -> [u8; 3] {
        let idx = (v.clamp(0.0, 1.0) * 255.0).round() as usize;
        self.table[idx]
    }

    pub fn table(&self) -> &[[u8; 3]; 256] {
        &self.table
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn jet_endpoints() {
        let jet = Colormap::jet();
        assert_eq!(jet.lookup(0.0), [0, 0, 255]);
        assert_eq!(jet.lookup(1.0), [255, 0, 0]);
        assert_eq!(jet.lookup(-5.0), [0, 0, 255]);
        assert_eq!(jet.lookup(5.0), [255, 0, 0]);
    }

    #[test]
    fn midpoint_is_green_dominant() {
        let [r, g, b] = Colormap::jet().lookup(0.5);
        assert!(g > 200 && r < 60 && b < 60, "got ({r},{g},{b})");
    }

    #[test]
    fn rejects_short_tables() {
        assert!(Colormap::parse("0,0,0\n1,1,1\n").is_err());
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("map.csv");
        std::fs::write(&path, JET_CSV).unwrap();
        let map = Colormap::from_file(&path).unwrap();
        assert_eq!(map.table(), Colormap::jet().table());
    }
}
