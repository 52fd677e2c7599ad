use super::{check_threshold, AuthorizedSubset, ParticipantIndex, Result};

/// All `C(n, t)` size-`t` subsets of `{1..n}`, each ascending, in
/// lexicographic order.
pub fn enumerate_minimal_authorized_subsets(n: usize, t: usize) -> Result<Vec<AuthorizedSubset>> {
    check_threshold(t, n)?;

    let mut out = Vec::new();
    let mut current: Vec<u32> = (1..=t as u32).collect();
    let n = n as u32;
    let t = t as u32;
    loop {
        out.push(AuthorizedSubset(current.iter().copied().map(ParticipantIndex).collect()));

        // rightmost position that can still be bumped
        let Some(pos) = (0..t as usize).rev().find(|&i| current[i] < n - t + 1 + i as u32) else {
            break;
        };
        current[pos] += 1;
        for i in pos + 1..t as usize {
            current[i] = current[i - 1] + 1;
        }
    }
    Ok(out)
}
