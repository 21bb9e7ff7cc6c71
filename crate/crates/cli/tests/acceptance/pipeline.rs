use std::fs;

use crate::common::{pipeline, REPRODUCIBLE};
use crate::Check;

pub fn determinism() -> Check {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    pipeline(a.path(), "3");
    pipeline(b.path(), "3");
    let mut bytes = 0;
    for f in REPRODUCIBLE {
        let (x, y) = (fs::read(a.path().join(f)), fs::read(b.path().join(f)));
        let (x, y) = (x.map_err(|e| format!("{f}: {e}"))?, y.map_err(|e| format!("{f}: {e}"))?);
        ensure!(x == y, "{f} differs between runs");
        bytes += x.len();
    }
    Ok(format!("{} files, {bytes} bytes identical", REPRODUCIBLE.len()))
}
