//! Feeder files: a header line followed by a TOML feeder description in SI.
//!
//! ```toml
//! # dropf-feeder v1
//! [base]
//! s_b = 1000000.0
//! vb_ln_default = 7200.0
//!
//! [[nodes]]
//! id = "sub"
//! kind = "substation"
//! phases = "abc"
//! ```
//!
//! Tables `branches`, `split_phase_transformers`, `triplex_lines`, `loads`
//! and `ders` follow the same field names as the feeder description types;
//! impedances are `[r, x]` in Ω, powers in W and var. Unknown fields are
//! errors.

use std::path::Path;

use dropf_core::netmodel::FeederDescription;

use crate::error::{CliError, CliResult};

pub const FEEDER_HEADER: &str = "# dropf-feeder v1";

pub fn feeder_to_text(desc: &FeederDescription) -> CliResult<String> {
    let body = toml::to_string(desc).map_err(|e| CliError::input(format!("cannot serialize feeder: {e}")))?;
    Ok(format!("{FEEDER_HEADER}\n{body}"))
}

pub fn feeder_from_text(text: &str) -> CliResult<FeederDescription> {
    let first = text.lines().next().unwrap_or("").trim();
    if first != FEEDER_HEADER {
        return Err(CliError::input(format!("line 1: expected header '{FEEDER_HEADER}', found '{first}'")));
    }
    toml::from_str(text).map_err(|e| CliError::input(format!("parse error: {}", e.to_string().trim_end())))
}

pub fn read_feeder(path: &Path) -> CliResult<FeederDescription> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
    feeder_from_text(&text).map_err(|e| e.context(path.display()))
}

pub fn write_feeder(desc: &FeederDescription, path: &Path) -> CliResult<()> {
    std::fs::write(path, feeder_to_text(desc)?).map_err(|e| CliError::input(format!("{}: {e}", path.display())))
}

#[cfg(test)]
mod tests {
    use super::*;
    use dropf_core::simharness::{generate_description, FeederGenSpec};

    #[test]
    fn generated_feeder_round_trips() {
        let d = generate_description(&FeederGenSpec::new(9, 0.5, 4)).unwrap();
        let text = feeder_to_text(&d).unwrap();
        let back = feeder_from_text(&text).unwrap();
        assert_eq!(back, d);
        assert_eq!(feeder_to_text(&back).unwrap(), text);
    }

    #[test]
    fn unknown_field_names_its_line() {
        let text = "# dropf-feeder v1\n[base]\ns_b = 1e6\n\n[[nodes]]\nid = \"sub\"\nkind = \"substation\"\ncolour = \"red\"\n";
        let e = feeder_from_text(text).unwrap_err();
        assert!(e.message.contains("line 8"), "{}", e.message);
        assert!(e.message.contains("colour"));
    }

    #[test]
    fn header_is_required() {
        assert!(feeder_from_text("[base]\ns_b = 1e6\nnodes = []\n").unwrap_err().message.contains("line 1"));
    }
}
