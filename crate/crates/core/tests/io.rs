mod common;

use common::rng;
use rand::Rng;
use recess_core::imaging::{load_cifar10, load_png, save_png, write_cifar10};
use recess_core::{Image, LabeledDataset, Shape};

#[test]
fn png_roundtrip_preserves_bytes() {
    let mut r = rng(60);
    let dir = tempfile::tempdir().unwrap();
    for (i, c) in [1, 3, 3, 1].into_iter().enumerate() {
        let (h, w) = (r.random_range(1..40), r.random_range(1..40));
        let bytes: Vec<u8> = (0..h * w * c).map(|_| r.random()).collect();
        let img = Image::from_bytes(Shape::new(h, w, c).unwrap(), &bytes).unwrap();
        let path = dir.path().join(format!("{i}.png"));
        save_png(&img, &path).unwrap();
        let back = load_png(&path).unwrap();
        assert_eq!(back.shape(), img.shape());
        assert_eq!(back.to_bytes(), bytes);
        let again = dir.path().join(format!("{i}-again.png"));
        save_png(&back, &again).unwrap();
        assert_eq!(load_png(&again).unwrap().to_bytes(), bytes);
    }
}

#[test]
fn cifar_records_agree_with_raw_bytes() {
    let mut r = rng(61);
    let shape = Shape::new(32, 32, 3).unwrap();
    let images: Vec<Image> = (0..4)
        .map(|_| {
            Image::from_bytes(
                shape,
                &(0..shape.len()).map(|_| r.random()).collect::<Vec<u8>>(),
            )
            .unwrap()
        })
        .collect();
    let labels = vec![7, 2, 9, 0];
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("batch.bin");
    write_cifar10(&path, &LabeledDataset::new(images, labels, 10).unwrap()).unwrap();

    // Byte-level reading: label, then the red, green and blue planes, each row-major.
    let raw = std::fs::read(&path).unwrap();
    assert_eq!(raw.len(), 4 * 3073);
    let loaded = load_cifar10(&[&path], None).unwrap();
    for rec in 0..4 {
        let record = &raw[rec * 3073..(rec + 1) * 3073];
        assert_eq!(loaded.labels()[rec], record[0] as usize);
        let img = &loaded.images()[rec];
        for ch in 0..3 {
            for row in 0..32 {
                for col in 0..32 {
                    let byte = record[1 + ch * 1024 + row * 32 + col];
                    assert_eq!(img.get(row, col, ch), f64::from(byte) / 255.0);
                }
            }
        }
    }
}
