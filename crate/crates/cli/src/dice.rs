//! Manual entry of a value rolled one decimal digit at a time on ten-sided
//! dice.

use std::io::{BufRead, Write};

use fairdraw_core::Modulus;

use crate::error::CliError;

/// Number of digits `d` with `10^d == m`, or `None` when `m` is not a power
/// of ten. Only then is every digit string equally likely to be in range.
pub fn digit_count(m: Modulus) -> Option<u32> {
    let mut v = m.get();
    let mut d = 0;
    while v > 1 {
        if v % 10 != 0 {
            return None;
        }
        v /= 10;
        d += 1;
    }
    Some(d)
}

/// Prompts for one digit per die, most significant first. Blank or invalid
/// lines are re-prompted; end of input is an error.
pub fn read_value<R: BufRead, W: Write>(input: &mut R, prompt: &mut W, m: Modulus) -> Result<u64, CliError> {
    let digits = digit_count(m).ok_or_else(|| {
        CliError::Usage(format!("--dice needs a power-of-ten modulus, this session uses {m}"))
    })?;
    let mut value = 0u64;
    let mut line = String::new();
    let mut i = 0;
    while i < digits {
        let _ = write!(prompt, "die {} of {digits} (0-9): ", i + 1);
        let _ = prompt.flush();
        line.clear();
        let n = input
            .read_line(&mut line)
            .map_err(CliError::io("reading dice input"))?;
        if n == 0 {
            return Err(CliError::Usage(format!("dice input ended after {i} of {digits} digits")));
        }
        match line.trim().as_bytes() {
            [d @ b'0'..=b'9'] => {
                value = value * 10 + u64::from(d - b'0');
                i += 1;
            }
            _ => {
                let _ = writeln!(prompt, "enter a single digit 0-9");
            }
        }
    }
    Ok(value)
}
