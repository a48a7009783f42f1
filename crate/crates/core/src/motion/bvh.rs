use std::fmt::Write as _;

use super::{parse_err, Channel, Joint, MotionClip, Result};

struct Token<'a> {
    text: &'a str,
    line: usize,
}

struct Tokens<'a> {
    items: Vec<Token<'a>>,
    pos: usize,
    last_line: usize,
}

impl<'a> Tokens<'a> {
    fn next(&mut self, what: &str) -> Result<&Token<'a>> {
        let tok = self
            .items
            .get(self.pos)
            .ok_or_else(|| parse_err(self.last_line, format!("unexpected end of file, expected {what}")))?;
        self.pos += 1;
        Ok(tok)
    }

    fn peek(&self) -> Option<&Token<'a>> {
        self.items.get(self.pos)
    }

    fn expect(&mut self, keyword: &str) -> Result<usize> {
        let tok = self.next(keyword)?;
        if tok.text != keyword {
            return Err(parse_err(tok.line, format!("expected `{keyword}`, found `{}`", tok.text)));
        }
        Ok(tok.line)
    }

    fn number(&mut self, what: &str) -> Result<f64> {
        let tok = self.next(what)?;
        parse_number(tok.text, tok.line)
    }
}

fn parse_number(text: &str, line: usize) -> Result<f64> {
    let value: f64 = text
        .parse()
        .map_err(|_| parse_err(line, format!("non-numeric value `{text}`")))?;
    if !value.is_finite() {
        return Err(parse_err(line, format!("non-finite value `{text}`")));
    }
    Ok(value)
}

/// Parses a BVH document (HIERARCHY + MOTION sections).
pub fn parse_bvh(text: &str) -> Result<MotionClip> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));

    let mut items = Vec::new();
    let mut motion_line = None;
    for (line_no, line) in lines.by_ref() {
        let trimmed = line.trim();
        if trimmed == "MOTION" {
            motion_line = Some(line_no);
            break;
        }
        items.extend(line.split_whitespace().map(|text| Token { text, line: line_no }));
    }
    let last_line = items.last().map_or(1, |t| t.line);
    let motion_line = motion_line.ok_or_else(|| parse_err(last_line, "missing MOTION section"))?;

    let mut tokens = Tokens {
        items,
        pos: 0,
        last_line,
    };
    tokens.expect("HIERARCHY")?;
    let mut skeleton = Vec::new();
    let root = tokens.next("ROOT")?;
    if root.text != "ROOT" {
        return Err(parse_err(root.line, format!("expected `ROOT`, found `{}`", root.text)));
    }
    parse_joint(&mut tokens, &mut skeleton, None)?;
    if let Some(extra) = tokens.peek() {
        return Err(parse_err(
            extra.line,
            format!("unexpected `{}` after the root joint (unbalanced braces?)", extra.text),
        ));
    }
    let channels: usize = skeleton.iter().map(|j| j.channels.len()).sum();

    let mut declared_frames = None;
    let mut frame_time = None;
    let mut data = Vec::new();
    let mut rows = 0usize;
    let mut last_line = motion_line;
    for (line_no, line) in lines {
        last_line = line_no;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        if let Some(rest) = trimmed.strip_prefix("Frames:") {
            let n = rest
                .trim()
                .parse::<usize>()
                .map_err(|_| parse_err(line_no, format!("invalid frame count `{}`", rest.trim())))?;
            declared_frames = Some(n);
            continue;
        }
        if let Some(rest) = trimmed.strip_prefix("Frame Time:") {
            let dt = parse_number(rest.trim(), line_no)?;
            if dt <= 0.0 {
                return Err(parse_err(line_no, format!("frame time must be positive, got {dt}")));
            }
            frame_time = Some(dt);
            continue;
        }
        if declared_frames.is_none() || frame_time.is_none() {
            return Err(parse_err(line_no, "frame data before `Frames:`/`Frame Time:` header"));
        }
        let before = data.len();
        for value in trimmed.split_whitespace() {
            data.push(parse_number(value, line_no)?);
        }
        let got = data.len() - before;
        if got != channels {
            return Err(parse_err(
                line_no,
                format!("frame row has {got} values, hierarchy declares {channels} channels"),
            ));
        }
        rows += 1;
    }
    let declared = declared_frames.ok_or_else(|| parse_err(last_line, "missing `Frames:` line"))?;
    let dt = frame_time.ok_or_else(|| parse_err(last_line, "missing `Frame Time:` line"))?;
    if rows != declared {
        return Err(parse_err(
            last_line,
            format!("header declares {declared} frames but {rows} rows follow"),
        ));
    }
    let fps = (1.0 / dt).round();
    MotionClip::from_flat(skeleton, fps, data)
}

fn parse_joint(tokens: &mut Tokens<'_>, skeleton: &mut Vec<Joint>, parent: Option<usize>) -> Result<()> {
    let name = tokens.next("joint name")?.text.to_string();
    tokens.expect("{")?;
    let index = skeleton.len();
    skeleton.push(Joint {
        name,
        parent,
        offset: [0.0; 3],
        channels: Vec::new(),
        end_site: None,
    });
    let close_line;
    loop {
        let tok = tokens.next("`}`")?;
        let line = tok.line;
        match tok.text {
            "OFFSET" => {
                let offset = [
                    tokens.number("offset x")?,
                    tokens.number("offset y")?,
                    tokens.number("offset z")?,
                ];
                skeleton[index].offset = offset;
            }
            "CHANNELS" => {
                let count = tokens.next("channel count")?;
                let n: usize = count
                    .text
                    .parse()
                    .map_err(|_| parse_err(count.line, format!("invalid channel count `{}`", count.text)))?;
                let mut channels = Vec::with_capacity(n);
                for _ in 0..n {
                    let c = tokens.next("channel name")?;
                    channels.push(c.text.parse::<Channel>().map_err(|e| parse_err(c.line, e))?);
                }
                skeleton[index].channels = channels;
            }
            "JOINT" => parse_joint(tokens, skeleton, Some(index))?,
            "End" => {
                tokens.expect("Site")?;
                tokens.expect("{")?;
                tokens.expect("OFFSET")?;
                let offset = [
                    tokens.number("offset x")?,
                    tokens.number("offset y")?,
                    tokens.number("offset z")?,
                ];
                tokens.expect("}")?;
                skeleton[index].end_site = Some(offset);
            }
            "}" => {
                close_line = line;
                break;
            }
            other => return Err(parse_err(line, format!("unexpected `{other}` in joint block"))),
        }
    }
    let joint = &skeleton[index];
    let rotations = joint.channels.iter().filter(|c| c.is_rotation()).count();
    let expected = if parent.is_none() { 6 } else { 3 };
    if joint.channels.len() != expected || rotations != 3 {
        return Err(parse_err(
            close_line,
            format!(
                "joint `{}` declares {} channels ({} rotations); expected {expected}",
                joint.name,
                joint.channels.len(),
                rotations
            ),
        ));
    }
    Ok(())
}

/// Formats with at least six significant digits and no exponent.
fn fmt_value(v: f64) -> String {
    if v == 0.0 {
        return "0.000000".to_string();
    }
    let magnitude = v.abs().log10().floor() as i32;
    let decimals = (5 - magnitude).clamp(6, 17) as usize;
    format!("{v:.decimals$}")
}

/// Emits HIERARCHY then MOTION, preserving joint order.
pub fn write_bvh(clip: &MotionClip) -> String {
    let skeleton = clip.skeleton();
    let mut children: Vec<Vec<usize>> = vec![Vec::new(); skeleton.len()];
    for (i, joint) in skeleton.iter().enumerate() {
        if let Some(p) = joint.parent {
            children[p].push(i);
        }
    }
    // Depth-first emission must visit joints in index order for the MOTION
    // columns to line up with the stored frames.
    let mut out = String::from("HIERARCHY\n");
    write_joint(&mut out, skeleton, &children, 0, 0);
    out.push_str("MOTION\n");
    let _ = writeln!(out, "Frames: {}", clip.num_frames());
    let _ = writeln!(out, "Frame Time: {:.8}", 1.0 / clip.fps());
    for row in clip.frames() {
        let line: Vec<String> = row.iter().map(|&v| fmt_value(v)).collect();
        out.push_str(&line.join(" "));
        out.push('\n');
    }
    out
}

fn write_joint(out: &mut String, skeleton: &[Joint], children: &[Vec<usize>], index: usize, depth: usize) {
    let indent = "\t".repeat(depth);
    let joint = &skeleton[index];
    let keyword = if joint.parent.is_none() { "ROOT" } else { "JOINT" };
    let _ = writeln!(out, "{indent}{keyword} {}", joint.name);
    let _ = writeln!(out, "{indent}{{");
    let [x, y, z] = joint.offset;
    let _ = writeln!(out, "{indent}\tOFFSET {} {} {}", fmt_value(x), fmt_value(y), fmt_value(z));
    let names: Vec<String> = joint.channels.iter().map(|c| c.to_string()).collect();
    let _ = writeln!(out, "{indent}\tCHANNELS {} {}", names.len(), names.join(" "));
    for &child in &children[index] {
        write_joint(out, skeleton, children, child, depth + 1);
    }
    if let Some([x, y, z]) = joint.end_site {
        let _ = writeln!(out, "{indent}\tEnd Site");
        let _ = writeln!(out, "{indent}\t{{");
        let _ = writeln!(out, "{indent}\t\tOFFSET {} {} {}", fmt_value(x), fmt_value(y), fmt_value(z));
        let _ = writeln!(out, "{indent}\t}}");
    }
    let _ = writeln!(out, "{indent}}}");
}
