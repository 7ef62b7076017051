/// Splits text into lowercase alphanumeric terms. Identifiers are broken at
/// underscores and at case boundaries (`maxFlowDinic` -> `max`, `flow`,
/// `dinic`; `HTTPServer` -> `http`, `server`), and at letter/digit seams.
pub fn tokenize(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    for word in text.split(|c: char| !c.is_alphanumeric()) {
        if word.is_empty() {
            continue;
        }
        split_identifier(word, &mut out);
    }
    out
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Class {
    Lower,
    Upper,
    Digit,
}

fn class(c: char) -> Class {
    if c.is_numeric() {
        Class::Digit
    } else if c.is_uppercase() {
        Class::Upper
    } else {
        Class::Lower
    }
}

fn split_identifier(word: &str, out: &mut Vec<String>) {
    let chars: Vec<char> = word.chars().collect();
    let mut start = 0;
    for i in 1..chars.len() {
        let (prev, cur) = (class(chars[i - 1]), class(chars[i]));
        let next_lower = chars.get(i + 1).is_some_and(|&c| class(c) == Class::Lower);
        let boundary = match (prev, cur) {
            (Class::Lower, Class::Upper) => true,
            (Class::Upper, Class::Upper) => next_lower,
            (Class::Digit, Class::Digit) => false,
            (Class::Digit, _) | (_, Class::Digit) => true,
            _ => false,
        };
        if boundary {
            out.push(chars[start..i].iter().collect::<String>().to_lowercase());
            start = i;
        }
    }
    out.push(chars[start..].iter().collect::<String>().to_lowercase());
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn splits_identifiers() {
        assert_eq!(tokenize("dp_prev[mask]"), ["dp", "prev", "mask"]);
        assert_eq!(tokenize("maxFlowDinic"), ["max", "flow", "dinic"]);
        assert_eq!(tokenize("HTTPServer"), ["http", "server"]);
        assert_eq!(tokenize("int64_t x2"), ["int", "64", "t", "x", "2"]);
        assert_eq!(tokenize("Shortest Path!"), ["shortest", "path"]);
    }

    #[test]
    fn punctuation_only_is_empty() {
        assert!(tokenize("{}();,.!?-- ==").is_empty());
    }
}
