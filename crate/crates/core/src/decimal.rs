//! Decimal-string manipulation, so scaling by powers of ten never passes
//! through binary floating point.

/// Moves the decimal point of an unsigned literal (`"12.5"`, `".5"`, `"7"`)
/// by `shift` places to the right (left when negative) and returns the
/// normalized result: no redundant leading or trailing zeros.
pub(crate) fn shift_point(literal: &str, shift: i32) -> Option<String> {
    let (int_part, frac_part) = literal.split_once('.').unwrap_or((literal, ""));
    if int_part.is_empty() && frac_part.is_empty() {
        return None;
    }
    if !int_part.bytes().chain(frac_part.bytes()).all(|b| b.is_ascii_digit()) {
        return None;
    }
    let digits = format!("{int_part}{frac_part}");
    let point = int_part.len() as i64 + shift as i64;
    let (int_digits, frac_digits) = if point <= 0 {
        (String::new(), format!("{}{}", "0".repeat((-point) as usize), digits))
    } else if point as usize >= digits.len() {
        (format!("{}{}", digits, "0".repeat(point as usize - digits.len())), String::new())
    } else {
        (digits[..point as usize].to_string(), digits[point as usize..].to_string())
    };
    let int_digits = int_digits.trim_start_matches('0');
    let frac_digits = frac_digits.trim_end_matches('0');
    let int_digits = if int_digits.is_empty() { "0" } else { int_digits };
    Some(if frac_digits.is_empty() { int_digits.to_string() } else { format!("{int_digits}.{frac_digits}") })
}
