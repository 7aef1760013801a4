use std::path::Path;
use std::process::{Command, Output};

use penh::model::ModelWeights;
use penh::records::read_records;
use penh::synth::{harmonic_speech, synthetic_rir, white_noise};
use penh::wav::{read_wav, write_wav, OutputFormat};

fn penh(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_penh")).args(args).output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn write(p: &Path, x: &[f64], rate: u32) {
    write_wav(p, x, rate, OutputFormat::Float32).unwrap();
}

#[test]
fn enhance_round_trip_and_flags() {
    let d = tempfile::tempdir().unwrap();
    let model = d.path().join("m.pnwt");
    assert_eq!(code(&penh(&["init-model", "--seed", "3", s(&model)])), 0);
    let input = d.path().join("in.wav");
    let x = harmonic_speech(0.5, 48_000, 1);
    write(&input, &x, 48_000);
    let out = d.path().join("out.wav");
    let o = penh(&["enhance", "--model", s(&model), s(&input), s(&out)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let a = read_wav(&out).unwrap();
    assert_eq!(a.samples.len(), x.len());
    assert_eq!(a.sample_rate, 48_000);

    let out2 = d.path().join("out2.wav");
    let o = penh(&["enhance", "--model", s(&model), "--batch", "4", s(&input), s(&out2)]);
    assert_eq!(code(&o), 0);
    assert_eq!(std::fs::read(&out).unwrap(), std::fs::read(&out2).unwrap());

    let out3 = d.path().join("out3.wav");
    let o = penh(&["enhance", "--model", s(&model), "--no-pitch", "--no-postfilter", s(&input), s(&out3)]);
    assert_eq!(code(&o), 0);
    assert_ne!(std::fs::read(&out).unwrap(), std::fs::read(&out3).unwrap());

    // declared rate does not match the file
    let o = penh(&["enhance", "--model", s(&model), "--rate", "16000", s(&input), s(&out3)]);
    assert_eq!(code(&o), 1);
}

#[test]
fn enhance_16k() {
    let d = tempfile::tempdir().unwrap();
    let model = d.path().join("m.pnwt");
    ModelWeights::desk_random(1).save(&model).unwrap();
    let input = d.path().join("in.wav");
    let x = harmonic_speech(0.4, 16_000, 2);
    write(&input, &x, 16_000);
    let out = d.path().join("out.wav");
    let o = penh(&["enhance", "--model", s(&model), "--rate", "16000", s(&input), s(&out)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let a = read_wav(&out).unwrap();
    assert_eq!((a.sample_rate, a.samples.len()), (16_000, x.len()));
}

#[test]
fn exit_codes() {
    let d = tempfile::tempdir().unwrap();
    assert_eq!(code(&penh(&[])), 1);
    assert_eq!(code(&penh(&["enhance"])), 1);
    assert_eq!(code(&penh(&["--help"])), 0);
    let missing = d.path().join("missing.pnwt");
    let out = d.path().join("o.wav");
    assert_eq!(code(&penh(&["enhance", "--model", s(&missing), s(&out), s(&out)])), 2);
    let bad = d.path().join("bad.pnwt");
    std::fs::write(&bad, b"PNWT\x01\x00").unwrap();
    let input = d.path().join("in.wav");
    write(&input, &[0.0; 4800], 48_000);
    assert_eq!(code(&penh(&["enhance", "--model", s(&bad), s(&input), s(&out)])), 3);
    let bad_wav = d.path().join("bad.wav");
    std::fs::write(&bad_wav, b"not a wav").unwrap();
    let model = d.path().join("m.pnwt");
    ModelWeights::desk_random(1).save(&model).unwrap();
    assert_eq!(code(&penh(&["enhance", "--model", s(&model), s(&bad_wav), s(&out)])), 3);
    let odd = d.path().join("odd.wav");
    write(&odd, &[0.0; 4410], 44_100);
    assert_eq!(code(&penh(&["enhance", "--model", s(&model), s(&odd), s(&out)])), 3);
    let bad_rec = d.path().join("bad.pnft");
    std::fs::write(&bad_rec, b"XXXX").unwrap();
    assert_eq!(code(&penh(&["eval-loss", s(&bad_rec), "--model", s(&model)])), 3);
}

#[test]
fn oracle_targets_and_loss() {
    let d = tempfile::tempdir().unwrap();
    let clean = harmonic_speech(0.6, 48_000, 4);
    let noise = white_noise(clean.len(), 0.03, 5);
    let noisy: Vec<f64> = clean.iter().zip(&noise).map(|(a, b)| a + b).collect();
    let (cp, np) = (d.path().join("c.wav"), d.path().join("n.wav"));
    write(&cp, &clean, 48_000);
    write(&np, &noisy, 48_000);
    let out = d.path().join("o.wav");
    let o = penh(&["oracle-enhance", s(&cp), s(&np), s(&out)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(read_wav(&out).unwrap().samples.len(), clean.len());

    let short = d.path().join("short.wav");
    write(&short, &clean[..1000], 48_000);
    assert_eq!(code(&penh(&["oracle-enhance", s(&short), s(&np), s(&out)])), 1);

    let rec = d.path().join("t.pnft");
    assert_eq!(code(&penh(&["make-targets", s(&cp), s(&np), s(&rec)])), 0);
    let recs = read_records(&std::fs::read(&rec).unwrap()).unwrap();
    assert_eq!(recs.len(), 60 + 1);

    let model = d.path().join("m.pnwt");
    ModelWeights::desk_random(2).save(&model).unwrap();
    let o = penh(&["eval-loss", s(&rec), "--model", s(&model)]);
    assert_eq!(code(&o), 0);
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.contains("frames 61"));
    let total: f64 = text
        .lines()
        .find_map(|l| l.strip_prefix("total "))
        .unwrap()
        .parse()
        .unwrap();
    assert!(total.is_finite() && total > 0.0);
}

#[test]
fn comb_response_csv_has_notches() {
    let d = tempfile::tempdir().unwrap();
    let p = d.path().join("c.csv");
    assert_eq!(code(&penh(&["comb-response", "--pitch-hz", "200", "--m", "5", s(&p)])), 0);
    let text = std::fs::read_to_string(&p).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("frequency_hz,magnitude_db"));
    let rows: Vec<(f64, f64)> = lines
        .map(|l| {
            let (a, b) = l.split_once(',').unwrap();
            (a.parse().unwrap(), b.parse().unwrap())
        })
        .collect();
    let at = |f: f64| rows.iter().find(|r| (r.0 - f).abs() < 1e-9).unwrap().1;
    for k in 1..=5 {
        assert!(at(200.0 * k as f64).abs() < 0.01);
        assert!(at(200.0 * k as f64 + 100.0) < -20.0);
    }
}

#[test]
fn make_dataset_is_seeded() {
    let d = tempfile::tempdir().unwrap();
    let (sd, nd, rd) = (d.path().join("s"), d.path().join("n"), d.path().join("r"));
    for p in [&sd, &nd, &rd] {
        std::fs::create_dir(p).unwrap();
    }
    write(&sd.join("a.wav"), &harmonic_speech(1.5, 48_000, 1), 48_000);
    write(&sd.join("b.wav"), &harmonic_speech(1.2, 48_000, 2), 48_000);
    write(&nd.join("n.wav"), &white_noise(48_000, 0.1, 3), 48_000);
    write(&rd.join("r.wav"), &synthetic_rir(48_000, 0.2, 10, 4), 48_000);
    let run = |out: &Path| {
        let o = penh(&[
            "make-dataset", "--speech", s(&sd), "--noise", s(&nd), "--rir", s(&rd), "--count", "3", "--seed", "9",
            s(out),
        ]);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
        std::fs::read_to_string(out.join("manifest.txt")).unwrap()
    };
    let (o1, o2) = (d.path().join("o1"), d.path().join("o2"));
    let m1 = run(&o1);
    assert_eq!(m1, run(&o2));
    assert_eq!(m1.lines().count(), 3);
    assert!(m1.lines().all(|l| l.contains("r.wav")));
    assert_eq!(
        std::fs::read(o1.join("000001.pnft")).unwrap(),
        std::fs::read(o2.join("000001.pnft")).unwrap()
    );
    assert!(read_records(&std::fs::read(o1.join("000002.pnft")).unwrap()).unwrap().len() > 100);
    let empty = d.path().join("empty");
    std::fs::create_dir(&empty).unwrap();
    let o = penh(&["make-dataset", "--speech", s(&empty), "--noise", s(&nd), "--rir", s(&rd), "--count", "1", s(&o1)]);
    assert_eq!(code(&o), 1);
}

#[test]
fn bench_reports_rtf() {
    let d = tempfile::tempdir().unwrap();
    let model = d.path().join("m.pnwt");
    ModelWeights::desk_random(1).save(&model).unwrap();
    let o = penh(&["bench", "--model", s(&model), "--seconds", "1"]);
    assert_eq!(code(&o), 0);
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.contains("mmacs 6.845"), "{text}");
    assert!(text.contains("rtf_batch4"));
}
