/// Reduces a raw model output to an identifier, or an empty string when
/// nothing usable survives.
///
/// Takes the first non-empty line (skipping bare code-fence lines), strips
/// backticks, surrounding quotes, whitespace and terminal punctuation,
/// turns interior whitespace and hyphens into underscores and drops every
/// remaining character outside `[A-Za-z0-9_]`. A leading digit gets an
/// underscore prefix. Case is preserved.
pub fn sanitize_name(raw: &str) -> String {
    let line = raw
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .find(|l| !is_fence_line(l));
    match line {
        Some(line) => clean_line(line),
        None => String::new(),
    }
}

// "```" or "```lang" on its own line; "```name```" is content
fn is_fence_line(line: &str) -> bool {
    line.strip_prefix("```")
        .is_some_and(|rest| !rest.contains("```"))
}

const QUOTES: &[char] = &['"', '\'', '\u{201c}', '\u{201d}', '\u{2018}', '\u{2019}'];
const TERMINAL: &[char] = &['.', ',', ';', ':', '!', '?'];

fn clean_line(line: &str) -> String {
    let mut s: String = line.chars().filter(|&c| c != '`').collect();
    loop {
        let next = s
            .trim()
            .trim_matches(QUOTES)
            .trim()
            .trim_matches(TERMINAL)
            .trim()
            .to_string();
        if next == s {
            break;
        }
        s = next;
    }
    let mut out: String = s
        .chars()
        .map(|c| {
            if c.is_whitespace() || c == '-' {
                '_'
            } else {
                c
            }
        })
        .filter(|c| c.is_ascii_alphanumeric() || *c == '_')
        .collect();
    if out.starts_with(|c: char| c.is_ascii_digit()) {
        out.insert(0, '_');
    }
    out
}
