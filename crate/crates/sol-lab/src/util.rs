//! Formatting and small execution helpers shared across modules.

/// Renders a double with 17 significant digits so parsing the string
/// recovers the exact bit pattern. Negative zero is normalized first.
pub fn fmt_f64(x: f64) -> String {
    let x = if x == 0.0 { 0.0 } else { x };
    format!("{x:.16e}")
}

/// Relative discrepancy |a - b| / max(1, |a|, |b|).
pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / 1.0_f64.max(a.abs()).max(b.abs())
}

/// Serde helper: doubles in reports are emitted as 17-digit strings.
pub fn ser_f64<S: serde::Serializer>(x: &f64, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_str(&fmt_f64(*x))
}

pub fn ser_f64_opt<S: serde::Serializer>(x: &Option<f64>, s: S) -> Result<S::Ok, S::Error> {
    match x {
        Some(v) => s.serialize_some(&fmt_f64(*v)),
        None => s.serialize_none(),
    }
}

/// Applies `f` to every item, splitting the slice across `threads` scoped
/// workers. Output order always matches input order.
pub fn run_chunked<T, R, F>(threads: usize, items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync,
{
    let threads = threads.max(1);
    if threads == 1 || items.len() < 2 {
        return items.iter().map(&f).collect();
    }
    let chunk = items.len().div_ceil(threads);
    std::thread::scope(|scope| {
        let handles: Vec<_> = items
            .chunks(chunk)
            .map(|part| scope.spawn(|| part.iter().map(&f).collect::<Vec<R>>()))
            .collect();
        handles
            .into_iter()
            .flat_map(|h| h.join().expect("worker panicked"))
            .collect()
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn formatted_doubles_round_trip_exactly() {
        for &x in &[0.0, -0.0, 1.0, -1.5, 0.3, 2.618033988749895, 1e-300, -3.5e17] {
            let s = fmt_f64(x);
            let back: f64 = s.parse().unwrap();
            assert_eq!(back.to_bits(), if x == 0.0 { 0.0f64 } else { x }.to_bits(), "{s}");
        }
    }

    #[test]
    fn chunked_execution_preserves_order() {
        let items: Vec<u64> = (0..1000).collect();
        let serial = run_chunked(1, &items, |x| x * x);
        for threads in [2, 3, 7, 16] {
            assert_eq!(run_chunked(threads, &items, |x| x * x), serial);
        }
    }
}
