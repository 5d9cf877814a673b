use std::fs::File;
use std::io::{BufReader, BufWriter};

use wilson_index::clifford::build_gamma_rep;
use wilson_index::gauge::{
    discretize, make_generalized_link, read_link_table, write_link_table, ConnectionDescriptor,
};
use wilson_index::latops::wilson_dirac;
use wilson_index::spectral::wilson_index;

#[test]
fn external_table_reproduces_the_index() {
    let rep = build_gamma_rep(2).unwrap();
    let lf = discretize(&make_generalized_link(ConnectionDescriptor::u1_flux(2)).unwrap(), 10).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("links.txt");
    write_link_table(&lf.to_table("U1"), BufWriter::new(File::create(&path).unwrap())).unwrap();

    let table = read_link_table(BufReader::new(File::open(&path).unwrap())).unwrap();
    let link = make_generalized_link(ConnectionDescriptor::external(table)).unwrap();
    let back = discretize(&link, 10).unwrap();
    let a = wilson_dirac(&lf, &rep, 0.2).unwrap().eigenvalues().unwrap();
    let b = wilson_dirac(&back, &rep, 0.2).unwrap().eigenvalues().unwrap();
    assert!(a.iter().zip(&b).all(|(x, y)| (x - y).abs() < 1e-12));
    assert_eq!(wilson_index(&back, &rep, 1.0).unwrap(), 2);
    assert!(discretize(&link, 12).is_err());
}

#[test]
fn matrix_market_export() {
    let rep = build_gamma_rep(2).unwrap();
    let lf = discretize(&make_generalized_link(ConnectionDescriptor::u1_flux(1)).unwrap(), 4).unwrap();
    let mut buf = Vec::new();
    wilson_dirac(&lf, &rep, 0.0).unwrap().export_matrix_market(&mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let mut lines = text.lines().filter(|l| !l.starts_with('%'));
    let header: Vec<usize> = lines.next().unwrap().split_whitespace().map(|t| t.parse().unwrap()).collect();
    assert_eq!(&header[..2], &[32, 32]);
    assert_eq!(lines.count(), header[2]);
}
