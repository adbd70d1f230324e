use proptest::prelude::*;
use tlpeval::io::{ingest_csv, write_dataset_csv, CsvSchema};

fn edges() -> impl Strategy<Value = Vec<(String, String, u64)>> {
    // disjoint alphabets keep at least two distinct nodes
    proptest::collection::vec(("[a-z]{1,3}", "[a-zA-Z]{0,2}[A-Z]", 0u64..50), 1..40)
}

fn to_csv(rows: &[(String, String, u64)]) -> String {
    let mut s = String::from("src,dst,time\n");
    for (a, b, t) in rows {
        s.push_str(&format!("{a},{b},{t}\n"));
    }
    s
}

proptest! {
    #[test]
    fn export_then_ingest_is_identity_on_labels(rows in edges()) {
        let d = ingest_csv(to_csv(&rows).as_bytes(), &CsvSchema::default(), "p").unwrap();
        let mut first = Vec::new();
        write_dataset_csv(&d, &mut first).unwrap();
        let again = ingest_csv(first.as_slice(), &CsvSchema::default(), "p").unwrap();
        let mut second = Vec::new();
        write_dataset_csv(&again, &mut second).unwrap();
        prop_assert_eq!(&first, &second);

        // same labelled triples, stably ordered by time
        let mut expected = rows.clone();
        expected.sort_by_key(|r| r.2);
        let got: Vec<(String, String, u64)> = again
            .dataset
            .edges()
            .iter()
            .map(|e| (again.labels[e.src as usize].clone(), again.labels[e.dst as usize].clone(), e.t))
            .collect();
        prop_assert_eq!(got, expected);
    }
}
