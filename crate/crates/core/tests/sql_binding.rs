use tuple_bubbles::catalog::{infer_schema, parse_date, parse_table, Database, Key};
use tuple_bubbles::inference::Region;
use tuple_bubbles::sql::{parse_and_bind, Aggregate};
use tuple_bubbles::{synth, Error};

fn catalog() -> tuple_bubbles::catalog::Catalog {
    synth::to_database(&synth::orders_customers()).unwrap().catalog()
}

fn region(sql: &str, attribute: &str) -> Region {
    let q = parse_and_bind(sql, &catalog()).unwrap();
    q.predicates
        .into_iter()
        .find(|p| p.attribute == attribute)
        .unwrap_or_else(|| panic!("no predicate on {attribute}"))
        .region
}

#[test]
fn date_literals_encode_to_day_codes() {
    let c = catalog();
    let dict = c.dictionary("Orders", "date").unwrap();
    let day = parse_date("02.03.2022").unwrap() as f64;
    let code = dict.find(Key::Num(day)).unwrap();
    assert_eq!(
        region("SELECT COUNT(*) FROM Orders WHERE date = '02.03.2022'", "Orders.date"),
        Region::point(code)
    );
    // Dates sort chronologically, so >= covers the later codes only.
    let r = region("SELECT COUNT(*) FROM Orders WHERE date >= '01.03.2022'", "Orders.date");
    assert_eq!(r, Region::Interval { lo: code, hi: dict.len() as u32 - 1 });
}

#[test]
fn absent_values_bind_to_empty_regions() {
    assert!(region("SELECT COUNT(*) FROM Customer WHERE name = 'C9'", "Customer.name").is_empty());
    assert!(region("SELECT COUNT(*) FROM Orders WHERE price = 11", "Orders.price").is_empty());
    assert!(region("SELECT COUNT(*) FROM Orders WHERE price > 40", "Orders.price").is_empty());
}

#[test]
fn repeated_predicates_intersect() {
    let r = region(
        "SELECT COUNT(*) FROM Orders WHERE price >= 15 AND price <= 30 AND price < 25",
        "Orders.price",
    );
    let c = catalog();
    let dict = c.dictionary("Orders", "price").unwrap();
    let lo = dict.find(Key::Num(15.0)).unwrap();
    let hi = dict.find(Key::Num(20.0)).unwrap();
    assert_eq!(r, Region::Interval { lo, hi });
}

#[test]
fn join_between_different_types_is_rejected() {
    let err = parse_and_bind(
        "SELECT COUNT(*) FROM Orders o, Customer c WHERE o.c_key = c.name",
        &catalog(),
    )
    .unwrap_err();
    assert!(matches!(err, Error::TypeMismatch(_)), "{err}");
}

#[test]
fn joins_must_follow_foreign_keys_and_connect() {
    let c = catalog();
    let err = parse_and_bind("SELECT COUNT(*) FROM Orders o, Customer c WHERE o.o_key = c.c_key", &c).unwrap_err();
    assert!(matches!(err, Error::Unsupported(_)), "{err}");
    let err = parse_and_bind("SELECT COUNT(*) FROM Orders, Customer", &c).unwrap_err();
    assert!(matches!(err, Error::Unanswerable(_)), "{err}");
    let q = parse_and_bind("SELECT COUNT(*) FROM Customer c, Orders o WHERE c.c_key = o.c_key", &c).unwrap();
    assert_eq!(q.joins[0].referencing, "Orders.c_key");
    assert_eq!(q.joins[0].referenced, "Customer.c_key");
}

#[test]
fn unknown_names_and_bad_aggregates() {
    let c = catalog();
    assert!(matches!(
        parse_and_bind("SELECT COUNT(*) FROM Nope", &c),
        Err(Error::UnknownRelation(_))
    ));
    assert!(matches!(
        parse_and_bind("SELECT SUM(nope) FROM Orders", &c),
        Err(Error::UnknownAttribute(_))
    ));
    assert!(matches!(
        parse_and_bind("SELECT AVG(name) FROM Customer", &c),
        Err(Error::TypeMismatch(_))
    ));
    assert!(matches!(
        parse_and_bind("SELECT COUNT(*) FROM Orders WHERE date = 5", &c),
        Err(Error::TypeMismatch(_))
    ));
}

#[test]
fn aggregates_over_nullable_attributes_skip_nulls() {
    let csv = "id,v\n1,3\n2,\n3,5\n";
    let table = parse_table(csv.as_bytes(), infer_schema("N", csv).unwrap()).unwrap();
    let db = Database::new(vec![table]).unwrap();
    let q = parse_and_bind("SELECT COUNT(v) FROM N", &db.catalog()).unwrap();
    assert_eq!(q.aggregate, Aggregate::Count);
    assert_eq!(q.target, None);
    assert_eq!(q.predicates[0].attribute, "N.v");
    assert_eq!(q.predicates[0].region, Region::Interval { lo: 0, hi: 1 });
    let exact = tuple_bubbles::bench::exact_execute(&q, &db).unwrap();
    assert_eq!(exact, Some(2.0));
}
