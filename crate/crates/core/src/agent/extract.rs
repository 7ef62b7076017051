use std::ops::Range;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("response contains no fenced code block")]
pub struct NoCodeBlock;

fn is_fence(line: &str) -> bool {
    let t = line.trim_start();
    t.starts_with("```") || t.starts_with("~~~")
}

/// Byte range of the last fenced block: `.0` covers the fences, `.1` the
/// contents. An unterminated trailing fence runs to the end of the text.
fn last_block(response: &str) -> Option<(Range<usize>, Range<usize>)> {
    let mut open: Option<(usize, usize)> = None;
    let mut last = None;
    let mut pos = 0;
    for line in response.split_inclusive('\n') {
        let start = pos;
        pos += line.len();
        if !is_fence(line) {
            continue;
        }
        match open.take() {
            None => open = Some((start, pos)),
            Some((outer, inner)) => {
                let mut end = start;
                if end > inner && response[..end].ends_with('\n') {
                    end -= 1;
                    if end > inner && response[..end].ends_with('\r') {
                        end -= 1;
                    }
                }
                last = Some((outer..pos, inner..end));
            }
        }
    }
    if let Some((outer, inner)) = open {
        last = Some((outer..response.len(), inner..response.len()));
    }
    last
}

/// Contents of the last fenced code block, with or without a language tag.
/// The result is always a contiguous slice of `response`.
pub fn extract_code_block(response: &str) -> Result<&str, NoCodeBlock> {
    last_block(response)
        .map(|(_, inner)| &response[inner])
        .ok_or(NoCodeBlock)
}

/// The response with its last fenced block removed: the prose part of an
/// answer.
pub fn strip_code_block(response: &str) -> String {
    match last_block(response) {
        Some((outer, _)) => format!("{}{}", &response[..outer.start], &response[outer.end..])
            .trim()
            .to_string(),
        None => response.trim().to_string(),
    }
}

/// Wraps code the way the prompts ask for it.
pub fn wrap_in_fence(code: &str) -> String {
    format!("```C++\n{code}\n```")
}
