pub const ROUGE_BETA: f64 = 1.2;

fn lcs_len(a: &[String], b: &[String]) -> usize {
    let mut prev = vec![0usize; b.len() + 1];
    let mut cur = vec![0usize; b.len() + 1];
    for x in a {
        for (j, y) in b.iter().enumerate() {
            cur[j + 1] = if x == y {
                prev[j] + 1
            } else {
                cur[j].max(prev[j + 1])
            };
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// Best LCS F-measure of `candidate` over `references`, recall weighted by
/// `beta`.
pub fn rouge_l(candidate: &[String], references: &[Vec<String>], beta: f64) -> f64 {
    references
        .iter()
        .map(|r| {
            let lcs = lcs_len(candidate, r);
            if lcs == 0 {
                return 0.0;
            }
            let p = lcs as f64 / candidate.len() as f64;
            let rec = lcs as f64 / r.len() as f64;
            (1.0 + beta * beta) * p * rec / (rec + beta * beta * p)
        })
        .fold(0.0, f64::max)
}
