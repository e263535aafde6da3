//! Named builders for local functions and rates, e.g. `projection(0)`,
//! `product([0,0], [1,0])`, `affine_rate(1, 0.2, 0, 1)`.
//!
//! A site or jump is a bare integer in one dimension and `[a, b, ..]` otherwise.

use rwde::lattice::{LocalFunction, Point};

type Parsed = Result<(String, Vec<String>), String>;

fn call(text: &str) -> Parsed {
    let text = text.trim();
    let open = text.find('(').ok_or_else(|| format!("`{text}` is not of the form name(args)"))?;
    let inner = text[open + 1..].strip_suffix(')').ok_or_else(|| format!("`{text}` lacks a closing parenthesis"))?;
    let mut args = Vec::new();
    let (mut depth, mut cur) = (0i32, String::new());
    for c in inner.chars() {
        match c {
            '[' => depth += 1,
            ']' => depth -= 1,
            ',' if depth == 0 => {
                args.push(std::mem::take(&mut cur).trim().to_string());
                continue;
            }
            _ => {}
        }
        cur.push(c);
    }
    if !cur.trim().is_empty() {
        args.push(cur.trim().to_string());
    }
    Ok((text[..open].trim().to_string(), args))
}

fn number(s: &str) -> Result<f64, String> {
    s.parse().map_err(|_| format!("`{s}` is not a number"))
}

fn point(s: &str, d: usize) -> Result<Point, String> {
    let coords: Vec<i64> = s
        .trim_start_matches('[')
        .trim_end_matches(']')
        .split(',')
        .map(|c| c.trim().parse().map_err(|_| format!("`{s}` is not a lattice point")))
        .collect::<Result<_, _>>()?;
    if coords.len() != d {
        return Err(format!("`{s}` has {} coordinates, expected {d}", coords.len()));
    }
    Point::new(&coords).map_err(|e| e.to_string())
}

pub fn local_function(text: &str, d: usize) -> Result<LocalFunction, String> {
    let (name, args) = call(text)?;
    match (name.as_str(), args.len()) {
        ("projection", 1) => Ok(LocalFunction::projection(point(&args[0], d)?)),
        ("product", n) if n > 0 => Ok(LocalFunction::product(&args.iter().map(|a| point(a, d)).collect::<Result<Vec<_>, _>>()?)),
        _ => Err(format!("unknown observable builder `{text}`")),
    }
}

/// `(jump, base, slope, site)` from `affine_rate(base, slope, site, jump)`.
pub fn affine_rate(text: &str, d: usize) -> Result<(Point, f64, f64, Point), String> {
    let (name, args) = call(text)?;
    if name != "affine_rate" || args.len() != 4 {
        return Err(format!("expected affine_rate(base, slope, site, jump), got `{text}`"));
    }
    Ok((point(&args[3], d)?, number(&args[0])?, number(&args[1])?, point(&args[2], d)?))
}
