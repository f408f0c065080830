use dosefind::designs::{DesignConfig, DesignKind};
use dosefind::tables::{build_table, DecisionTable, Entry, TableFormat};

const GOLDEN: [(DesignKind, &str); 5] = [
    (DesignKind::Mtpi, include_str!("golden/table_mtpi.csv")),
    (DesignKind::Mtpi2, include_str!("golden/table_mtpi2.csv")),
    (DesignKind::Boin, include_str!("golden/table_boin.csv")),
    (DesignKind::Ccd, include_str!("golden/table_ccd.csv")),
    (DesignKind::I3p3, include_str!("golden/table_i3p3.csv")),
];

#[test]
fn tables_match_goldens_byte_for_byte() {
    for (kind, golden) in GOLDEN {
        let t = build_table(&DesignConfig::new(kind), 12).unwrap();
        assert_eq!(t.emit(TableFormat::Csv), golden, "{kind}");
    }
}

#[test]
fn goldens_parse_back() {
    for (kind, golden) in GOLDEN {
        let t = DecisionTable::parse_csv(golden).unwrap();
        assert_eq!(t.design.design, kind);
        assert_eq!(t.get(3, 3), Some(Entry::DU), "{kind}");
        assert_eq!(t.get(3, 2), Some(Entry::D), "{kind}");
    }
}

#[test]
fn i3p3_example_cells() {
    let t = build_table(&DesignConfig::new(DesignKind::I3p3), 12).unwrap();
    assert_eq!(t.get(3, 1), Some(Entry::S));
    assert_eq!(t.get(6, 3), Some(Entry::D));
    assert_eq!(t.get(3, 0), Some(Entry::E));
}

#[test]
fn unsupported_format_rejected() {
    assert!("xlsx".parse::<TableFormat>().is_err());
}
