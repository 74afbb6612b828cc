use std::path::Path;

use super::state::RegretState;
use crate::error::{invalid, Result};

fn reader(path: &Path) -> Result<csv::Reader<std::fs::File>> {
    Ok(csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_path(path)?)
}

/// Loads a `regret,mass[,label]` CSV. A non-numeric first row is taken as a header.
/// Either every row carries a label or none does.
pub fn load_state_csv(path: &Path) -> Result<RegretState> {
    let mut plain = Vec::new();
    let mut labeled = Vec::new();
    for (line, rec) in reader(path)?.records().enumerate() {
        let rec = rec?;
        let parsed = (rec.get(0).map(str::parse::<f64>), rec.get(1).map(str::parse::<f64>));
        let (r, m) = match parsed {
            (Some(Ok(r)), Some(Ok(m))) => (r, m),
            _ if line == 0 => continue,
            _ => return Err(invalid(format!("{}: line {} is not `regret,mass`", path.display(), line + 1))),
        };
        match rec.get(2) {
            Some(label) if !label.is_empty() => labeled.push((label.to_string(), r, m)),
            _ => plain.push((r, m)),
        }
    }
    match (plain.is_empty(), labeled.is_empty()) {
        (false, true) => RegretState::from_atoms(plain),
        (true, false) => RegretState::labeled(labeled),
        (true, true) => Err(invalid(format!("{}: no atoms", path.display()))),
        (false, false) => Err(invalid(format!("{}: mixes labeled and unlabeled rows", path.display()))),
    }
}

/// Loads per-iteration expert losses: one row per iteration, one column per expert, entries in [−1, 1].
pub fn load_expert_losses(path: &Path) -> Result<Vec<Vec<f64>>> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (line, rec) in reader(path)?.records().enumerate() {
        let rec = rec?;
        let parsed: std::result::Result<Vec<f64>, _> = rec.iter().map(str::parse::<f64>).collect();
        let row = match parsed {
            Ok(row) => row,
            Err(_) if line == 0 => continue,
            Err(e) => return Err(invalid(format!("{}: line {}: {e}", path.display(), line + 1))),
        };
        if let Some(y) = row.iter().find(|y| !(-1.0..=1.0).contains(*y)) {
            return Err(invalid(format!("{}: line {}: loss {y} outside [-1,1]", path.display(), line + 1)));
        }
        if let Some(first) = rows.first() {
            if first.len() != row.len() {
                return Err(invalid(format!(
                    "{}: line {} has {} experts, expected {}",
                    path.display(),
                    line + 1,
                    row.len(),
                    first.len()
                )));
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(invalid(format!("{}: no loss rows", path.display())));
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn state_csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("s.csv");
        std::fs::write(&p, "regret,mass\n1,0.25\n-1,0.75\n").unwrap();
        let s = load_state_csv(&p).unwrap();
        assert_eq!(s, RegretState::from_atoms([(-1.0, 0.75), (1.0, 0.25)]).unwrap());

        std::fs::write(&p, "0,0.5,a\n2,0.5,b\n").unwrap();
        let s = load_state_csv(&p).unwrap();
        assert!(s.is_labeled());

        std::fs::write(&p, "0,0.5\n2,0.4\n").unwrap();
        assert!(load_state_csv(&p).is_err());
    }

    #[test]
    fn expert_losses_validated() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("l.csv");
        std::fs::write(&p, "e0,e1\n1,-1\n0.5,0\n").unwrap();
        assert_eq!(load_expert_losses(&p).unwrap(), vec![vec![1.0, -1.0], vec![0.5, 0.0]]);
        std::fs::write(&p, "1,-1\n2,0\n").unwrap();
        assert!(load_expert_losses(&p).is_err());
        std::fs::write(&p, "1,-1\n0\n").unwrap();
        assert!(load_expert_losses(&p).is_err());
    }
}
