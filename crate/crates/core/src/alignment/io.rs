use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

/// Writes every file to a sibling temp file first and renames them into
/// place only after all writes succeeded, in the order given.
pub(crate) fn write_atomically(files: &[(&Path, &[u8])]) -> io::Result<()> {
    let mut staged: Vec<(PathBuf, &Path)> = Vec::with_capacity(files.len());
    let result = (|| {
        for (dest, bytes) in files {
            if let Some(dir) = dest.parent().filter(|d| !d.as_os_str().is_empty()) {
                fs::create_dir_all(dir)?;
            }
            let tmp = temp_path(dest);
            let mut f = fs::File::create(&tmp)?;
            staged.push((tmp, dest));
            f.write_all(bytes)?;
            f.sync_all()?;
        }
        Ok(())
    })();
    if let Err(e) = result {
        for (tmp, _) in &staged {
            let _ = fs::remove_file(tmp);
        }
        return Err(e);
    }
    for (tmp, dest) in &staged {
        fs::rename(tmp, dest)?;
    }
    Ok(())
}

fn temp_path(dest: &Path) -> PathBuf {
    let name = dest
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();
    dest.with_file_name(format!(".{name}.tmp-{}", std::process::id()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn writes_all_or_nothing() {
        let dir = tempfile::tempdir().unwrap();
        let a = dir.path().join("a.json");
        let b = dir.path().join("b.json");
        write_atomically(&[(&a, b"one"), (&b, b"two")]).unwrap();
        assert_eq!(fs::read(&a).unwrap(), b"one");
        assert_eq!(fs::read(&b).unwrap(), b"two");

        // parent is a regular file, so the second write cannot succeed
        let blocked = b.join("c.json");
        assert!(write_atomically(&[(&a, b"changed"), (&blocked, b"x")]).is_err());
        assert_eq!(fs::read(&a).unwrap(), b"one");
        let leftovers: Vec<_> = fs::read_dir(dir.path()).unwrap().collect();
        assert_eq!(leftovers.len(), 2);

        let nested = dir.path().join("x").join("y").join("d.json");
        write_atomically(&[(&nested, b"ok")]).unwrap();
        assert_eq!(fs::read(&nested).unwrap(), b"ok");
    }
}
