use orderstat_gp::weather::{read_weather, Bounds, sample_uniform_inputs, synthesize_weather, write_weather};
use orderstat_gp::{Error, InputBox64, WeatherRecord64};
use proptest::prelude::*;

fn lag1_autocorrelation(x: &[f64]) -> f64 {
    let n = x.len() as f64;
    let m = x.iter().sum::<f64>() / n;
    let var: f64 = x.iter().map(|v| (v - m).powi(2)).sum();
    let cov: f64 = x.windows(2).map(|w| (w[0] - m) * (w[1] - m)).sum();
    cov / var
}

#[test]
fn synthetic_sequence_is_persistent_and_in_box() {
    let bx = InputBox64::default();
    let w = synthesize_weather(10_000, &bx, 11).unwrap();
    assert_eq!(w.len(), 10_000);
    assert!(w.iter().enumerate().all(|(i, r)| r.index == i && bx.contains(r)));
    for series in [
        w.iter().map(|r| r.hs).collect::<Vec<_>>(),
        w.iter().map(|r| r.tp).collect(),
        w.iter().map(|r| r.vw).collect(),
    ] {
        let rho = lag1_autocorrelation(&series);
        assert!(rho > 0.5, "lag-1 autocorrelation {rho}");
    }
}

#[test]
fn zero_hours_is_a_usage_error() {
    assert!(matches!(
        synthesize_weather(0, &InputBox64::default(), 1),
        Err(Error::Usage(_))
    ));
}

#[test]
fn inverted_box_is_rejected() {
    let bx = InputBox64 {
        hs: Bounds::new(5.0, 1.0),
        ..InputBox64::default()
    };
    assert!(synthesize_weather(10, &bx, 1).is_err());
    assert!(sample_uniform_inputs(10, &bx, 1).is_err());
}

#[test]
fn csv_round_trip() {
    let w = synthesize_weather(500, &InputBox64::default(), 2).unwrap();
    let mut buf = Vec::new();
    write_weather(&w, &mut buf).unwrap();
    let back: Vec<WeatherRecord64> = read_weather(buf.as_slice()).unwrap();
    assert_eq!(back, w);
}

#[test]
fn csv_errors_carry_line_numbers() {
    let bad_number = "index,hs,tp,vw\n0,1.0,8.0,3.0\n1,abc,8.0,3.0\n";
    match read_weather::<f64, _>(bad_number.as_bytes()) {
        Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
        other => panic!("{other:?}"),
    }
    let negative = "index,hs,tp,vw\n0,1.0,8.0,3.0\n1,1.0,8.0,3.0\n2,-1.0,8.0,3.0\n";
    match read_weather::<f64, _>(negative.as_bytes()) {
        Err(Error::Parse { line, .. }) => assert_eq!(line, 4),
        other => panic!("{other:?}"),
    }
    let header = "hour,hs,tp,vw\n0,1.0,8.0,3.0\n";
    assert!(matches!(read_weather::<f64, _>(header.as_bytes()), Err(Error::Schema(_))));
    let short = "index,hs,tp,vw\n0,1.0,8.0\n";
    assert!(matches!(read_weather::<f64, _>(short.as_bytes()), Err(Error::Schema(_))));
}

proptest! {
    #[test]
    fn uniform_design_fills_the_box(seed in any::<u64>(), n in 1usize..300) {
        let bx = InputBox64::default();
        let d = sample_uniform_inputs(n, &bx, seed).unwrap();
        prop_assert_eq!(d.len(), n);
        prop_assert!(d.iter().all(|r| bx.contains(r)));
        prop_assert_eq!(d, sample_uniform_inputs(n, &bx, seed).unwrap());
    }
}
