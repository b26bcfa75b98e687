use std::io::Read;

use anyhow::{Context, Result};
use mspsolve::{
    backbutton_mspe, detect_format, parse_backbutton, parse_mspe, parse_ppda, termination_mspe, InputFormat, Msp,
};

use crate::{FormatArg, InputArgs};

/// A system read from the command line, with remarks worth showing the user.
pub struct Loaded {
    pub msp: Msp,
    pub notes: Vec<String>,
}

pub fn read_text(path: &str) -> Result<String> {
    if path == "-" {
        let mut text = String::new();
        std::io::stdin().read_to_string(&mut text).context("reading standard input")?;
        Ok(text)
    } else {
        std::fs::read_to_string(path).with_context(|| format!("reading {path}"))
    }
}

pub fn load(args: &InputArgs) -> Result<Loaded> {
    let text = read_text(&args.file)?;
    let format = match args.format {
        Some(FormatArg::Mspe) => InputFormat::Mspe,
        Some(FormatArg::Ppda) => InputFormat::Ppda,
        Some(FormatArg::Backbutton) => InputFormat::BackButton,
        None => detect_format(&text),
    };
    let at = |e: mspsolve::Error| anyhow::Error::new(e).context(args.file.clone());
    let mut notes = Vec::new();
    let msp = match format {
        InputFormat::Mspe => parse_mspe(&text).map_err(at)?,
        InputFormat::Ppda => {
            let t = termination_mspe(&parse_ppda(&text).map_err(at)?).map_err(at)?;
            if !t.removed.is_empty() {
                notes.push(format!(
                    "removed {} unproductive triple(s) (termination probability 0)",
                    t.removed.len()
                ));
            }
            t.msp
        }
        InputFormat::BackButton => backbutton_mspe(&parse_backbutton(&text).map_err(at)?),
    };
    Ok(Loaded { msp, notes })
}
