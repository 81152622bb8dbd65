//! Byte layouts of the on-disk formats, checked against hand-built files.

use qd_cascade::correlator::Histogram;
use qd_cascade::hyper::HyperspectralCube;
use qd_cascade::sim::{Channel, TimeTag, TimeTagStream};
use qd_cascade::tagfile;

#[test]
fn qtt1_layout() {
    let stream = TimeTagStream::from_unsorted(vec![
        TimeTag { timestamp: 5, channel: Channel::Sync },
        TimeTag { timestamp: -2, channel: Channel::XR },
        TimeTag { timestamp: 1 << 40, channel: Channel::XxT },
    ]);
    let mut bytes = Vec::new();
    tagfile::write_binary(&stream, &mut bytes).unwrap();
    let mut expected = b"QTT1\0\0\0\0".to_vec();
    for (code, t) in [(3u8, -2i64), (4, 5), (0, 1 << 40)] {
        expected.push(code);
        expected.extend([0u8; 7]);
        expected.extend(t.to_le_bytes());
    }
    assert_eq!(bytes, expected);
    assert_eq!(tagfile::read_binary(&expected[..]).unwrap(), stream);

    let mut bad = expected.clone();
    bad[0] = b'X';
    assert!(tagfile::read_binary(&bad[..]).is_err());
    let mut truncated = expected.clone();
    truncated.pop();
    assert!(tagfile::read_binary(&truncated[..]).is_err());
}

#[test]
fn csv_tags_accept_labels_and_codes() {
    let text = "# channel,timestamp_ps\nSYNC,0\n2,150\nXX_R,90\n";
    let stream = tagfile::read_csv(text.as_bytes()).unwrap();
    let channels: Vec<Channel> = stream.records().iter().map(|r| r.channel).collect();
    assert_eq!(channels, [Channel::Sync, Channel::XxR, Channel::XT]);
}

#[test]
fn cube_layout() {
    let cube =
        HyperspectralCube::new(vec![0.0, 1.0], vec![5.0], vec![780.0, 781.0, 782.0], vec![1, 2, 3, 4, 5, 6]).unwrap();
    let mut bytes = Vec::new();
    cube.write(&mut bytes).unwrap();
    let mut expected = b"QCUBE1\0\0".to_vec();
    for n in [2u64, 1, 3] {
        expected.extend(n.to_le_bytes());
    }
    for v in [0.0f64, 1.0, 5.0, 780.0, 781.0, 782.0] {
        expected.extend(v.to_le_bytes());
    }
    for c in 1u32..=6 {
        expected.extend(c.to_le_bytes());
    }
    assert_eq!(bytes, expected);
    // x-major: (x=1, y=0, λ=2) is the last voxel
    assert_eq!(cube.get(1, 0, 2), 6);
    assert_eq!(HyperspectralCube::read(&expected[..]).unwrap(), cube);
}

#[test]
fn histogram_csv_tolerates_provenance_header() {
    let mut h = Histogram::symmetric(8, 4).unwrap();
    h.add(-8);
    h.add(3);
    let text = format!("# qd-cascade correlate\n# config_hash=0123456789abcdef\n{}", h.to_csv());
    assert_eq!(Histogram::from_csv(&text).unwrap(), h);
}
