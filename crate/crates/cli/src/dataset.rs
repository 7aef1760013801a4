use std::fs;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use walkdir::WalkDir;

use penh::pitch::PITCH_RATE;
use penh::records::write_records;
use penh::targets::{extract_records, mix_example_with, MixOverrides};
use penh::wav::{read_wav, write_wav, OutputFormat};

use crate::{io_err, with_path, CliError};

struct Clip {
    name: String,
    samples: Vec<f64>,
}

fn wav_files(dir: &Path) -> Result<Vec<PathBuf>, CliError> {
    if !dir.is_dir() {
        return Err(CliError::Io(format!("{}: not a directory", dir.display())));
    }
    let mut files = Vec::new();
    for entry in WalkDir::new(dir).sort_by_file_name() {
        let entry = entry.map_err(|e| CliError::Io(e.to_string()))?;
        let p = entry.path();
        if entry.file_type().is_file() && p.extension().is_some_and(|e| e.eq_ignore_ascii_case("wav")) {
            files.push(p.to_path_buf());
        }
    }
    if files.is_empty() {
        return Err(CliError::Usage(format!("{}: no .wav files", dir.display())));
    }
    Ok(files)
}

fn load_dir(dir: &Path) -> Result<Vec<Clip>, CliError> {
    wav_files(dir)?
        .par_iter()
        .map(|p| {
            let a = with_path(p, read_wav(p))?;
            if a.sample_rate != PITCH_RATE {
                return Err(CliError::Format(format!(
                    "{}: dataset inputs must be {PITCH_RATE} Hz, found {}",
                    p.display(),
                    a.sample_rate
                )));
            }
            let name = p.strip_prefix(dir).unwrap_or(p).to_string_lossy().replace(' ', "_");
            Ok(Clip { name, samples: a.samples })
        })
        .collect()
}

pub fn make_dataset(speech: &Path, noise: &Path, rir: &Path, count: usize, seed: u64, out: &Path) -> Result<(), CliError> {
    let speech = load_dir(speech)?;
    let noise = load_dir(noise)?;
    let rirs = load_dir(rir)?;
    fs::create_dir_all(out).map_err(|e| io_err(out, e))?;
    let lines: Vec<Result<Option<String>, CliError>> = (0..count)
        .into_par_iter()
        .map(|i| {
            let ex_seed = seed.wrapping_add(i as u64);
            let mut pick = ChaCha8Rng::seed_from_u64(ex_seed);
            pick.set_stream(1);
            let s = &speech[pick.random_range(0..speech.len())];
            let n = &noise[pick.random_range(0..noise.len())];
            let r = &rirs[pick.random_range(0..rirs.len())];
            let overrides = MixOverrides {
                rir_id: Some(r.name.clone()),
                ..MixOverrides::default()
            };
            let ex = match mix_example_with(&s.samples, &n.samples, &r.samples, ex_seed, &overrides) {
                Ok(ex) => ex,
                Err(penh::Error::Rejected(why)) => {
                    eprintln!("example {i:06} skipped: {why}");
                    return Ok(None);
                }
                Err(e) => return Err(e.into()),
            };
            let id = format!("{i:06}");
            let clean_path = out.join(format!("{id}_clean.wav"));
            let noisy_path = out.join(format!("{id}_noisy.wav"));
            with_path(&clean_path, write_wav(&clean_path, &ex.clean, PITCH_RATE, OutputFormat::Float32))?;
            with_path(&noisy_path, write_wav(&noisy_path, &ex.noisy, PITCH_RATE, OutputFormat::Float32))?;
            let recs = extract_records(&ex.clean, &ex.noisy, PITCH_RATE)?;
            let rec_path = out.join(format!("{id}.pnft"));
            let f = fs::File::create(&rec_path).map_err(|e| io_err(&rec_path, e))?;
            with_path(&rec_path, write_records(BufWriter::new(f), &recs))?;
            Ok(Some(format!("{id} {} {} {}", ex.meta.manifest_line(), s.name, n.name)))
        })
        .collect();
    let mut manifest = String::new();
    for l in lines {
        if let Some(l) = l? {
            manifest.push_str(&l);
            manifest.push('\n');
        }
    }
    let mpath = out.join("manifest.txt");
    fs::write(&mpath, manifest).map_err(|e| io_err(&mpath, e))
}
