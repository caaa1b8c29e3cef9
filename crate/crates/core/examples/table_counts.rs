//! Table-count distribution behind the conjugate update of r.
use lgnb::crt::{build_f_table, build_rr_table, expected_table_count, sample_table_count};
use lgnb::rng::RngStream;

fn main() -> lgnb::Result<()> {
    let f = build_f_table(6)?;
    for m in 1..=6 {
        let row: Vec<String> = f.row(m)[1..].iter().map(|v| format!("{v:.5}")).collect();
        println!("F({m}, .) = {}", row.join(" "));
    }

    // L | y, r: more tables as r grows, at most y of them
    let y = 12;
    for r in [0.1, 1.0, 10.0, 100.0] {
        let table = build_rr_table(y as usize, r)?;
        println!("y = {y}, r = {r:5}: E[L] = {:.4}", expected_table_count(y, &table)?);
    }

    let table = build_rr_table(4, 2.0)?;
    let mut rng = RngStream::new(7);
    let mut counts = [0u32; 5];
    for _ in 0..100_000 {
        counts[sample_table_count(4, &table, &mut rng)? as usize] += 1;
    }
    for j in 1..=4 {
        println!("y = 4, r = 2: P(L = {j}) = {:.4}, sampled {:.4}", table.get(4, j), counts[j] as f64 / 1e5);
    }
    Ok(())
}
