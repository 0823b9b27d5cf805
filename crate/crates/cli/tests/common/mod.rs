#![allow(dead_code)]

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use mixreg_cli::manifest::RunManifest;

pub fn mixreg(args: &[&str]) -> (i32, String, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let argv: Vec<&str> = std::iter::once("mixreg").chain(args.iter().copied()).collect();
    let code = mixreg_cli::run(argv, &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

pub fn manifest(dir: &Path) -> RunManifest {
    serde_json::from_str(&fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap()
}

/// Every file under `dir`, manifests with wall_time zeroed.
pub fn snapshot(dir: &Path) -> BTreeMap<String, String> {
    let mut files = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
                continue;
            }
            let mut text = fs::read_to_string(&p).unwrap();
            if p.file_name().unwrap() == "manifest.json" {
                let mut m: RunManifest = serde_json::from_str(&text).unwrap();
                m.wall_time = 0.0;
                text = serde_json::to_string_pretty(&m).unwrap();
            }
            files.insert(p.strip_prefix(dir).unwrap().to_string_lossy().replace('\\', "/"), text);
        }
    }
    files
}
