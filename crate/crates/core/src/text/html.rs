//! Tag stripping for HTML bodies and documents.
//!
//! Output never contains literal text that would be re-read as markup: a
//! `<` that would open a tag is written `&lt;`, and an `&` that would start
//! a recognized entity is written `&amp;`. That keeps the function
//! idempotent even when decoded entities spell out tags.

const BLOCK_TAGS: &[&str] = &[
    "p", "br", "div", "li", "ul", "ol", "tr", "table", "h1", "h2", "h3", "h4", "h5", "h6", "blockquote", "pre",
    "section", "article", "header", "footer", "hr", "title", "td", "th",
];

fn is_tag_start(c: Option<char>) -> bool {
    matches!(c, Some(c) if c.is_ascii_alphabetic() || c == '/' || c == '!' || c == '?')
}

/// Decode the entity at the start of `s` (which begins with `&`).
/// Returns the character and the entity's byte length.
fn decode_entity(s: &str) -> Option<(char, usize)> {
    let end = s[1..].find(';').filter(|&i| i > 0 && i <= 10)? + 1;
    let name = &s[1..end];
    let c = match name {
        "amp" => '&',
        "lt" => '<',
        "gt" => '>',
        "quot" => '"',
        "apos" => '\'',
        _ => {
            let num = name.strip_prefix('#')?;
            let code = match num.strip_prefix(['x', 'X']) {
                Some(hex) => u32::from_str_radix(hex, 16).ok()?,
                None => num.parse::<u32>().ok()?,
            };
            char::from_u32(code).filter(|c| *c != '\0')?
        }
    };
    Some((c, end + 1))
}

fn tag_name(tag: &str) -> String {
    tag.trim_start_matches(['<', '/'])
        .chars()
        .take_while(|c| c.is_ascii_alphanumeric())
        .collect::<String>()
        .to_ascii_lowercase()
}

fn skip_raw_text(s: &str, pos: usize, name: &str) -> usize {
    let close = format!("</{name}");
    let lower = s[pos..].to_ascii_lowercase();
    match lower.find(&close) {
        Some(i) => {
            let after = pos + i;
            s[after..].find('>').map_or(s.len(), |j| after + j + 1)
        }
        None => s.len(),
    }
}

/// Remove tags, drop script/style content, decode the basic entities and
/// numeric references, and collapse whitespace. Block-level tags become
/// line breaks.
pub fn strip_html(input: &str) -> String {
    let mut decoded = String::with_capacity(input.len());
    let mut pos = 0;
    while pos < input.len() {
        let rest = &input[pos..];
        let c = rest.chars().next().expect("non-empty");
        if c == '<' && is_tag_start(rest[1..].chars().next()) {
            if rest.starts_with("<!--") {
                pos += rest.find("-->").map_or(rest.len(), |i| i + 3);
                continue;
            }
            if let Some(close) = rest.find('>') {
                let tag = &rest[..=close];
                let name = tag_name(tag);
                pos += close + 1;
                if (name == "script" || name == "style") && !tag.starts_with("</") && !tag.ends_with("/>") {
                    pos = skip_raw_text(input, pos, &name);
                }
                decoded.push(if BLOCK_TAGS.contains(&name.as_str()) { '\n' } else { ' ' });
                continue;
            }
        }
        if c == '&' {
            if let Some((ch, len)) = decode_entity(rest) {
                decoded.push(ch);
                pos += len;
                continue;
            }
        }
        decoded.push(c);
        pos += c.len_utf8();
    }
    collapse_whitespace(&protect(&decoded))
}

/// Re-escape characters that a second pass would treat as markup.
fn protect(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for (i, c) in s.char_indices() {
        let rest = &s[i..];
        match c {
            '<' if is_tag_start(rest[1..].chars().next()) => out.push_str("&lt;"),
            '&' if decode_entity(rest).is_some() => out.push_str("&amp;"),
            _ => out.push(c),
        }
    }
    out
}

/// Runs of whitespace containing a line break become one `\n`; other runs
/// become one space. Leading and trailing whitespace is removed.
fn collapse_whitespace(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    let mut run: Option<bool> = None; // Some(has_newline)
    for c in s.chars() {
        if c.is_whitespace() {
            let nl = c == '\n' || c == '\r';
            run = Some(run.unwrap_or(false) || nl);
            continue;
        }
        if let Some(nl) = run.take() {
            if !out.is_empty() {
                out.push(if nl { '\n' } else { ' ' });
            }
        }
        out.push(c);
    }
    out
}
