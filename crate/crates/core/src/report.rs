//! Report serialization: a JSON envelope, flat CSV tables and plain text.
//!
//! JSON keys appear in struct declaration order and every float is written
//! with 17 significant digits (`{:.16e}`), which round-trips any `f64`
//! exactly. Output is therefore byte-stable for identical inputs.

use std::fmt::Write as _;
use std::io;

use serde::{Deserialize, Serialize};
use serde_json::ser::{Formatter, PrettyFormatter};

use crate::chains::ChainReport;
use crate::classes::{MembershipReport, Witness};
use crate::domain::Domain;
use crate::probe::{FuzzReport, Origin};

pub const SCHEMA: &str = "hadamard-lab/1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Envelope<R> {
    pub schema: String,
    pub command: String,
    pub inputs: serde_json::Map<String, serde_json::Value>,
    pub result: R,
}

impl<R> Envelope<R> {
    pub fn new(
        command: &str,
        inputs: serde_json::Map<String, serde_json::Value>,
        result: R,
    ) -> Self {
        Envelope {
            schema: SCHEMA.to_string(),
            command: command.to_string(),
            inputs,
            result,
        }
    }
}

/// Stated and corrected symmetric chains for one function.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorollaryPair {
    pub f: String,
    pub stated: ChainReport,
    pub corrected: ChainReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorollaryAudit {
    pub domain: Domain,
    pub pairs: Vec<CorollaryPair>,
}

struct FixedFloats<'a> {
    inner: PrettyFormatter<'a>,
}

impl Formatter for FixedFloats<'_> {
    fn write_f64<W: ?Sized + io::Write>(&mut self, w: &mut W, v: f64) -> io::Result<()> {
        write!(w, "{}", fmt_f64(v))
    }

    fn write_f32<W: ?Sized + io::Write>(&mut self, w: &mut W, v: f32) -> io::Result<()> {
        self.write_f64(w, v as f64)
    }

    fn begin_array<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.inner.begin_array(w)
    }

    fn end_array<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.inner.end_array(w)
    }

    fn begin_array_value<W: ?Sized + io::Write>(
        &mut self,
        w: &mut W,
        first: bool,
    ) -> io::Result<()> {
        self.inner.begin_array_value(w, first)
    }

    fn end_array_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.inner.end_array_value(w)
    }

    fn begin_object<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.inner.begin_object(w)
    }

    fn end_object<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.inner.end_object(w)
    }

    fn begin_object_key<W: ?Sized + io::Write>(
        &mut self,
        w: &mut W,
        first: bool,
    ) -> io::Result<()> {
        self.inner.begin_object_key(w, first)
    }

    fn begin_object_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.inner.begin_object_value(w)
    }

    fn end_object_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.inner.end_object_value(w)
    }
}

/// 17 significant digits in scientific notation.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// Pretty JSON with fixed-precision floats and a trailing newline.
pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(
        &mut buf,
        FixedFloats {
            inner: PrettyFormatter::with_indent(b"  "),
        },
    );
    value.serialize(&mut ser).expect("report types serialize");
    let mut s = String::from_utf8(buf).expect("serde_json writes UTF-8");
    s.push('\n');
    s
}

/// Report types that can be emitted in every output format.
pub trait Render: Serialize {
    fn csv(&self) -> String;
    fn text(&self) -> String;
}

fn opt(v: Option<f64>) -> String {
    v.map(fmt_f64).unwrap_or_default()
}

fn csv_table(header: &[&str], rows: Vec<Vec<String>>) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    for r in rows {
        w.write_record(&r).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("csv writes UTF-8")
}

fn short(v: Option<f64>) -> String {
    match v {
        Some(v) => format!("{v:.10}"),
        None => "n/a".to_string(),
    }
}

fn witness_line(w: &Witness) -> String {
    let pts: Vec<String> = w.points.iter().map(|p| format!("{p:?}")).collect();
    let lambda = w.lambda.map(|l| format!(" lambda={l}")).unwrap_or_default();
    format!(
        "{:?} at {}{lambda}: lhs={:.10} rhs={:.10} violation={:.3e}",
        w.kind,
        pts.join(" "),
        w.lhs,
        w.rhs,
        w.violation
    )
}

impl Render for MembershipReport {
    fn csv(&self) -> String {
        let rows = self
            .witnesses
            .iter()
            .enumerate()
            .map(|(i, w)| {
                let coords = |k: usize| {
                    w.points
                        .get(k)
                        .map(|p| p.iter().map(|c| fmt_f64(*c)).collect::<Vec<_>>().join(" "))
                        .unwrap_or_default()
                };
                vec![
                    self.class.to_string(),
                    self.verdict.to_string(),
                    i.to_string(),
                    serde_json::to_value(w.kind)
                        .unwrap()
                        .as_str()
                        .unwrap()
                        .to_string(),
                    coords(0),
                    coords(1),
                    opt(w.lambda),
                    fmt_f64(w.lhs),
                    fmt_f64(w.rhs),
                    fmt_f64(w.violation),
                ]
            })
            .collect();
        csv_table(
            &[
                "class",
                "verdict",
                "witness",
                "kind",
                "p",
                "q",
                "lambda",
                "lhs",
                "rhs",
                "violation",
            ],
            rows,
        )
    }

    fn text(&self) -> String {
        let mut s = String::new();
        writeln!(s, "class:    {}", self.class).unwrap();
        writeln!(s, "verdict:  {}", self.verdict).unwrap();
        writeln!(
            s,
            "samples:  {} tested, {} violations, {} evaluation faults",
            self.samples_tested, self.violations_found, self.eval_faults
        )
        .unwrap();
        for w in &self.witnesses {
            writeln!(s, "  witness {}", witness_line(w)).unwrap();
        }
        s
    }
}

fn chain_rows(r: &ChainReport, prefix: &[String]) -> Vec<Vec<String>> {
    let mut rows = Vec::new();
    let pad = |mut v: Vec<String>| {
        let mut row = prefix.to_vec();
        row.append(&mut v);
        row
    };
    for (i, t) in r.terms.iter().enumerate() {
        rows.push(pad(vec![
            "term".into(),
            i.to_string(),
            t.label.clone(),
            opt(t.value),
            fmt_f64(t.quad_error),
            t.converged.to_string(),
            String::new(),
            String::new(),
        ]));
    }
    for l in &r.links {
        rows.push(pad(vec![
            "link".into(),
            l.lhs_index.to_string(),
            r.link_label(l),
            opt(l.slack),
            fmt_f64(l.allowance),
            (!l.inconclusive).to_string(),
            l.holds.to_string(),
            l.inconclusive.to_string(),
        ]));
    }
    for d in &r.details {
        rows.push(pad(vec![
            "detail".into(),
            String::new(),
            d.label.clone(),
            opt(d.value),
            fmt_f64(d.quad_error),
            d.converged.to_string(),
            String::new(),
            String::new(),
        ]));
    }
    rows
}

const CHAIN_COLUMNS: [&str; 8] = [
    "section",
    "index",
    "label",
    "value",
    "error",
    "converged",
    "holds",
    "inconclusive",
];

fn chain_text(r: &ChainReport, s: &mut String) {
    writeln!(s, "chain:    {} on {}", r.chain, r.domain).unwrap();
    for (i, t) in r.terms.iter().enumerate() {
        let flag = if t.converged { "" } else { "  (not converged)" };
        writeln!(s, "  t{i} {:<24} {}{flag}", t.label, short(t.value)).unwrap();
    }
    for l in &r.links {
        let status = if l.inconclusive {
            "inconclusive"
        } else if l.holds {
            "holds"
        } else {
            "VIOLATED"
        };
        writeln!(
            s,
            "  t{} <= t{}  slack {}  {status}",
            l.lhs_index,
            l.rhs_index,
            short(l.slack)
        )
        .unwrap();
    }
    for d in &r.details {
        writeln!(s, "  . {:<26} {}", d.label, short(d.value)).unwrap();
    }
    for m in &r.class_preconditions {
        writeln!(s, "  precondition {}: {}", m.class, m.verdict).unwrap();
    }
    if let Some(w) = &r.symmetry_violation {
        writeln!(s, "  not symmetric: {}", witness_line(w)).unwrap();
    }
    writeln!(s, "verdict:  {}", r.verdict).unwrap();
}

impl Render for ChainReport {
    fn csv(&self) -> String {
        csv_table(&CHAIN_COLUMNS, chain_rows(self, &[]))
    }

    fn text(&self) -> String {
        let mut s = String::new();
        chain_text(self, &mut s);
        s
    }
}

fn origin_label(o: &Origin) -> String {
    match o {
        Origin::Seeded { trial, seed } => format!("trial {trial} (seed {seed})"),
        Origin::Injection { name } => format!("injection {name}"),
    }
}

impl Render for FuzzReport {
    fn csv(&self) -> String {
        let mut rows = Vec::new();
        for v in &self.violations {
            rows.push(vec![
                "violation".into(),
                origin_label(&v.origin),
                v.f.clone(),
                v.g.clone().unwrap_or_default(),
                v.report
                    .links
                    .iter()
                    .find(|l| !l.holds && !l.inconclusive)
                    .map(|l| v.report.link_label(l))
                    .unwrap_or_default(),
                opt(v.report.tightest_link().and_then(|l| l.slack)),
            ]);
        }
        for p in &self.precondition_failures {
            let classes: Vec<String> = p.classes.iter().map(|c| c.to_string()).collect();
            rows.push(vec![
                "precondition".into(),
                origin_label(&p.origin),
                p.f.clone(),
                p.g.clone().unwrap_or_default(),
                classes.join(" "),
                String::new(),
            ]);
        }
        if let Some(m) = &self.min_slack {
            rows.push(vec![
                "min-slack".into(),
                origin_label(&m.origin),
                String::new(),
                String::new(),
                m.link.clone(),
                fmt_f64(m.slack),
            ]);
        }
        csv_table(&["kind", "origin", "f", "g", "link", "slack"], rows)
    }

    fn text(&self) -> String {
        let mut s = String::new();
        writeln!(
            s,
            "fuzz:     {} on {}, {} trials, master seed {}",
            self.chain, self.domain, self.trials, self.master_seed
        )
        .unwrap();
        if !self.injections.is_empty() {
            writeln!(s, "injections: {}", self.injections.join(", ")).unwrap();
        }
        writeln!(s, "violations: {}", self.violations.len()).unwrap();
        for v in &self.violations {
            let g =
                v.g.as_ref()
                    .map(|g| format!(", g = {g}"))
                    .unwrap_or_default();
            writeln!(s, "  {}: f = {}{g}", origin_label(&v.origin), v.f).unwrap();
        }
        writeln!(
            s,
            "precondition failures: {}",
            self.precondition_failures.len()
        )
        .unwrap();
        writeln!(s, "inconclusive: {}", self.inconclusive_count).unwrap();
        if let Some(m) = &self.min_slack {
            writeln!(
                s,
                "min slack: {:.3e} at {} ({})",
                m.slack,
                m.link,
                origin_label(&m.origin)
            )
            .unwrap();
        }
        s
    }
}

impl Render for CorollaryAudit {
    fn csv(&self) -> String {
        let mut rows = Vec::new();
        for p in &self.pairs {
            for r in [&p.stated, &p.corrected] {
                rows.extend(chain_rows(r, &[p.f.clone(), r.chain.to_string()]));
            }
        }
        let mut header = vec!["f", "variant"];
        header.extend(CHAIN_COLUMNS);
        csv_table(&header, rows)
    }

    fn text(&self) -> String {
        let mut s = String::new();
        for p in &self.pairs {
            writeln!(s, "f = {}", p.f).unwrap();
            chain_text(&p.stated, &mut s);
            chain_text(&p.corrected, &mut s);
            s.push('\n');
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chains::{evaluate, ChainId, ChainOptions};
    use crate::classes::{check_1d, CheckOptions, ClassTag, Verdict};
    use crate::domain::{Interval, Rect};
    use crate::expr::parse;
    use crate::probe::{fuzz_chain, FuzzConfig};

    #[test]
    fn floats_use_seventeen_digits() {
        assert_eq!(to_json(&0.0625), "6.2500000000000000e-2\n");
        assert_eq!(to_json(&1.0), "1.0000000000000000e0\n");
        let third = 1.0 / 3.0;
        let back: f64 = serde_json::from_str(&to_json(&third)).unwrap();
        assert_eq!(back, third);
        assert_eq!(to_json(&f64::NAN), "null\n");
    }

    #[test]
    fn chain_report_keys_in_order() {
        let f = parse("x^2*y^2").unwrap();
        let r = evaluate(
            ChainId::CoordConvex,
            &f,
            None,
            Rect::unit().into(),
            &ChainOptions::default(),
        )
        .unwrap();
        let json = to_json(&Envelope::new("verify", Default::default(), r.clone()));
        let top = ["schema", "command", "inputs", "result"].map(|k| format!("\n  \"{k}\""));
        let inner = [
            "chain",
            "domain",
            "terms",
            "links",
            "details",
            "class_preconditions",
            "precondition_failed",
            "symmetry_violation",
            "verdict",
        ]
        .map(|k| format!("\n    \"{k}\""));
        let pos: Vec<usize> = top
            .iter()
            .chain(&inner)
            .map(|k| json.find(k.as_str()).unwrap())
            .collect();
        assert!(pos.windows(2).all(|w| w[0] < w[1]), "{json}");
        let back: Envelope<ChainReport> = serde_json::from_str(&json).unwrap();
        assert_eq!(back.result, r);
    }

    #[test]
    fn empty_witness_list_serializes_as_array() {
        let f = parse("x^2").unwrap();
        let m = check_1d(
            &f as &dyn crate::func::Univariate,
            Interval::unit(),
            ClassTag::Convex1D,
            &CheckOptions::default(),
        )
        .unwrap();
        assert_eq!(m.verdict, Verdict::HoldsOnSamples);
        assert!(to_json(&m).contains("\"witnesses\": []"));
        let back: MembershipReport = serde_json::from_str(&to_json(&m)).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn fuzz_report_round_trips() {
        let r = fuzz_chain(
            ChainId::CoordGlSymStated,
            &FuzzConfig::default(),
            3,
            9,
            &ChainOptions::default(),
        )
        .unwrap();
        assert!(!r.violations.is_empty());
        let back: FuzzReport = serde_json::from_str(&to_json(&r)).unwrap();
        assert_eq!(back, r);
    }

    #[test]
    fn csv_and_text_shapes() {
        let f = parse("1").unwrap();
        let r = evaluate(
            ChainId::CoordP,
            &f,
            None,
            Rect::unit().into(),
            &ChainOptions::default(),
        )
        .unwrap();
        let csv = r.csv();
        let mut lines = csv.lines();
        assert_eq!(
            lines.next().unwrap(),
            "section,index,label,value,error,converged,holds,inconclusive"
        );
        assert_eq!(csv.lines().filter(|l| l.starts_with("term,")).count(), 4);
        assert_eq!(csv.lines().filter(|l| l.starts_with("link,")).count(), 3);
        let text = r.text();
        assert!(text.contains("verdict:  holds"));
    }
}
