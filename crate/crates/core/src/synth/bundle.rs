use std::fs;
use std::path::{Path, PathBuf};

use super::{SynthError, Tutorial};
use crate::device::render_svg;

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> SynthError + '_ {
    move |source| SynthError::Io {
        path: path.display().to_string(),
        source,
    }
}

/// Writes `<out_dir>/<id>/tutorial.json` and its SVG assets. All references
/// inside `tutorial.json` are relative to the bundle directory.
pub fn write_bundle(tutorial: &Tutorial, out_dir: &Path) -> Result<PathBuf, SynthError> {
    let dir = out_dir.join(&tutorial.id);
    fs::create_dir_all(&dir).map_err(io_err(&dir))?;

    for (name, asset) in &tutorial.assets {
        let path = dir.join(name);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).map_err(io_err(parent))?;
        }
        let svg = render_svg(&asset.frame, asset.screen_size, asset.view);
        fs::write(&path, svg).map_err(io_err(&path))?;
    }

    let json_path = dir.join("tutorial.json");
    let mut json = serde_json::to_string_pretty(tutorial).expect("tutorial serializes");
    json.push('\n');
    fs::write(&json_path, json).map_err(io_err(&json_path))?;
    Ok(dir)
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::device::fixtures::small_device;
    use crate::executor::{execute_beam, ExecConfig};
    use crate::parser::{parse, segment};
    use crate::synth::{fallback, merge_beams};

    fn tutorial(text: &str) -> Tutorial {
        let dev = Arc::new(small_device());
        let beams = parse(text, 1).unwrap();
        let trace = execute_beam("demo", 0, &dev, &beams[0], &ExecConfig::default());
        let seg = segment(text, &beams[0]).unwrap();
        merge_beams(&[trace], &[seg], dev.screen_size).unwrap()
    }

    fn files(dir: &Path) -> Vec<(String, Vec<u8>)> {
        let mut out: Vec<_> = walkdir::WalkDir::new(dir)
            .sort_by_file_name()
            .into_iter()
            .filter_map(Result::ok)
            .filter(|e| e.file_type().is_file())
            .map(|e| {
                (
                    e.path().strip_prefix(dir).unwrap().display().to_string(),
                    fs::read(e.path()).unwrap(),
                )
            })
            .collect();
        out.sort();
        out
    }

    #[test]
    fn bundle_is_self_contained_and_stable() {
        let t = tutorial("Open Settings. Tap Long list. Tap Item 8.");
        let out = tempfile::tempdir().unwrap();
        let dir = write_bundle(&t, out.path()).unwrap();
        let first = files(&dir);
        // 3 steps × (overview + closeup) + 3 scroll frames
        assert_eq!(first.iter().filter(|(n, _)| n.ends_with(".svg")).count(), 9);
        for r in t.asset_refs() {
            assert!(dir.join(r).is_file(), "{r}");
        }
        write_bundle(&t, out.path()).unwrap();
        assert_eq!(files(&dir), first);
    }

    #[test]
    fn text_only_bundle_has_only_json() {
        let dev = Arc::new(small_device());
        let text = "Tap Bluetooth. Tap Wi-Fi.";
        let beams = parse(text, 1).unwrap();
        let trace = execute_beam("textonly", 0, &dev, &beams[0], &ExecConfig::default());
        let t = fallback(&trace, &segment(text, &beams[0]).unwrap(), dev.screen_size);
        let out = tempfile::tempdir().unwrap();
        let dir = write_bundle(&t, out.path()).unwrap();
        let names: Vec<_> = files(&dir).into_iter().map(|(n, _)| n).collect();
        assert_eq!(names, ["tutorial.json"]);
    }

    #[test]
    fn json_round_trips() {
        let t = tutorial("Open Settings. Tap Network & internet.");
        let json = serde_json::to_string(&t).unwrap();
        let back: Tutorial = serde_json::from_str(&json).unwrap();
        assert_eq!(back.steps, t.steps);
        let value: serde_json::Value = serde_json::from_str(&json).unwrap();
        let step = &value["steps"][1];
        assert_eq!(step["primary"]["action"]["kind"], "tap");
        assert_eq!(step["primary"]["action"]["element"], "network");
        assert!(step["primary"]["closeup"]["ref"].as_str().unwrap().ends_with("_closeup.svg"));
        assert_eq!(step["primary"]["closeup"]["crop"], serde_json::json!([0, 60, 400, 160]));
        assert!(value.get("title").is_none());
    }
}
