//! Converter PQ capability curves.
//!
//! A curve is a list of convex constraint atoms in the (P, Q) plane, anchored
//! at the DC-bus and AC voltage where the manufacturer characterised it. The
//! disk atom may carry different radii for Q >= 0 and Q < 0, which makes a
//! whole curve non-convex; [`FeasibleRegion`] therefore keeps the two Q-sign
//! halves as separate convex cells.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::text::{parse_number, significant_lines};

/// Absolute slack (kW / kvar / kVA) used by membership tests so that points
/// placed exactly on a boundary by the optimizer are not rejected by rounding.
pub const MEMBERSHIP_TOL: f64 = 1e-9;

/// The (vdc, vac) anchors of the five characterised curves.
pub const KNOWN_ANCHORS: [CurveKey; 5] = [
    CurveKey::new(600, 300),
    CurveKey::new(550, 300),
    CurveKey::new(500, 300),
    CurveKey::new(500, 330),
    CurveKey::new(500, 270),
];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CurveError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("curve `{curve}`: {reason}")]
    Invalid { curve: String, reason: String },
    #[error("DC voltage {vdc} V outside the characterised window (500, 800]")]
    DcOutOfRange { vdc: f64 },
    #[error("AC voltage must be positive, got {vac} V")]
    AcNotPositive { vac: f64 },
    #[error("no curve loaded for anchor {0}")]
    MissingCurve(CurveKey),
    #[error("shrink factor must lie in (0, 1], got {0}")]
    BadShrink(f64),
    #[error("a region needs one or two curves, got {0}")]
    CurveCount(usize),
}

/// Which half of a disk constraint applies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DiskSector {
    All,
    UpperQ,
    LowerQ,
}

/// Q-sign half of the PQ plane.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Cell {
    /// Q >= 0 (capacitive).
    Upper,
    /// Q <= 0 (inductive).
    Lower,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ConstraintAtom {
    /// P >= p
    PMin(f64),
    /// P <= p
    PMax(f64),
    /// P^2 + Q^2 <= radius^2 on the given sector.
    Disk { radius: f64, sector: DiskSector },
    /// Q <= c0 + c1 P + c2 P^2, with c2 <= 0.
    ParabolaCap { c0: f64, c1: f64, c2: f64 },
    /// Q <= q
    QMax(f64),
}

impl ConstraintAtom {
    /// Whether the atom constrains points of `cell`.
    pub fn applies_to(&self, cell: Cell) -> bool {
        match (self, cell) {
            (ConstraintAtom::Disk { sector: DiskSector::UpperQ, .. }, Cell::Lower) => false,
            (ConstraintAtom::Disk { sector: DiskSector::LowerQ, .. }, Cell::Upper) => false,
            _ => true,
        }
    }

    /// Evaluates the inequality at (p, q), ignoring the sector.
    pub fn holds(&self, p: f64, q: f64) -> bool {
        let tol = MEMBERSHIP_TOL;
        match *self {
            ConstraintAtom::PMin(min) => p >= min - tol,
            ConstraintAtom::PMax(max) => p <= max + tol,
            ConstraintAtom::Disk { radius, .. } => p.hypot(q) <= radius + tol,
            ConstraintAtom::ParabolaCap { c0, c1, c2 } => q <= c0 + c1 * p + c2 * p * p + tol,
            ConstraintAtom::QMax(max) => q <= max + tol,
        }
    }

    /// The same atom describing the set scaled by `s` about the origin.
    pub fn scaled(&self, s: f64) -> ConstraintAtom {
        match *self {
            ConstraintAtom::PMin(v) => ConstraintAtom::PMin(v * s),
            ConstraintAtom::PMax(v) => ConstraintAtom::PMax(v * s),
            ConstraintAtom::Disk { radius, sector } => ConstraintAtom::Disk { radius: radius * s, sector },
            ConstraintAtom::ParabolaCap { c0, c1, c2 } => ConstraintAtom::ParabolaCap { c0: c0 * s, c1, c2: c2 / s },
            ConstraintAtom::QMax(v) => ConstraintAtom::QMax(v * s),
        }
    }

    fn check(&self) -> Result<(), String> {
        match *self {
            ConstraintAtom::Disk { radius, .. } if radius <= 0.0 => Err(format!("disk radius {radius} must be positive")),
            ConstraintAtom::ParabolaCap { c2, .. } if c2 > 0.0 => {
                Err(format!("parabola cap curvature {c2} must be <= 0"))
            }
            _ => Ok(()),
        }
    }
}

/// Anchor of a curve in whole volts, used as its lookup key.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CurveKey {
    pub vdc: u16,
    pub vac: u16,
}

impl CurveKey {
    pub const fn new(vdc: u16, vac: u16) -> Self {
        CurveKey { vdc, vac }
    }
}

impl fmt::Display for CurveKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({} V, {} V)", self.vdc, self.vac)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CapabilityCurve {
    pub id: String,
    pub vdc_anchor: f64,
    pub vac_anchor: f64,
    pub atoms: Vec<ConstraintAtom>,
}

impl CapabilityCurve {
    pub fn key(&self) -> CurveKey {
        CurveKey::new(self.vdc_anchor.round() as u16, self.vac_anchor.round() as u16)
    }

    fn validate(&self) -> Result<(), CurveError> {
        let invalid = |reason: String| CurveError::Invalid { curve: self.id.clone(), reason };

        let key = self.key();
        let integral = (self.vdc_anchor - f64::from(key.vdc)).abs() < 1e-9
            && (self.vac_anchor - f64::from(key.vac)).abs() < 1e-9;
        if !integral || !KNOWN_ANCHORS.contains(&key) {
            return Err(invalid(format!(
                "anchor ({} V, {} V) is not one of the characterised operating points",
                self.vdc_anchor, self.vac_anchor
            )));
        }
        if self.atoms.is_empty() {
            return Err(invalid("no constraints".into()));
        }
        for atom in &self.atoms {
            atom.check().map_err(invalid)?;
        }

        let pmin = self.atoms.iter().filter_map(|a| match a {
            ConstraintAtom::PMin(v) => Some(*v),
            _ => None,
        });
        let pmax = self.atoms.iter().filter_map(|a| match a {
            ConstraintAtom::PMax(v) => Some(*v),
            _ => None,
        });
        let lo = pmin.fold(f64::NEG_INFINITY, f64::max);
        let hi = pmax.fold(f64::INFINITY, f64::min);
        if lo >= hi {
            return Err(invalid(format!("P lower bound {lo} is not below upper bound {hi}")));
        }

        if let Some(atom) = self.atoms.iter().find(|a| !a.holds(0.0, 0.0)) {
            return Err(invalid(format!("idle point (0, 0) violates {atom:?}")));
        }
        Ok(())
    }
}

/// Parses a curve-definition document. See `data/curves.txt` for the grammar.
pub fn load_curves(source: &str) -> Result<Vec<CapabilityCurve>, CurveError> {
    let mut curves = Vec::new();
    let mut open: Option<(usize, CapabilityCurve)> = None;

    for (line, tokens) in significant_lines(source) {
        let parse_err = |message: String| CurveError::Parse { line, message };
        let nums = |count: usize| -> Result<Vec<f64>, CurveError> {
            let args = &tokens[1..];
            if args.len() != count {
                return Err(parse_err(format!(
                    "`{}` expects {count} numeric argument(s), found {}",
                    tokens[0],
                    args.len()
                )));
            }
            args.iter()
                .map(|t| parse_number(t).map_err(|e| parse_err(e.to_string())))
                .collect()
        };

        match tokens[0] {
            "curve" => {
                if open.is_some() {
                    return Err(parse_err("`curve` before previous curve's `end`".into()));
                }
                if tokens.len() != 4 {
                    return Err(parse_err("expected `curve <id> <vdc_anchor> <vac_anchor>`".into()));
                }
                let vdc = parse_number(tokens[2]).map_err(|e| parse_err(e.to_string()))?;
                let vac = parse_number(tokens[3]).map_err(|e| parse_err(e.to_string()))?;
                open = Some((
                    line,
                    CapabilityCurve { id: tokens[1].to_string(), vdc_anchor: vdc, vac_anchor: vac, atoms: Vec::new() },
                ));
            }
            "end" => {
                let (_, curve) = open.take().ok_or_else(|| parse_err("`end` without `curve`".into()))?;
                curve.validate()?;
                if curves.iter().any(|c: &CapabilityCurve| c.key() == curve.key()) {
                    return Err(CurveError::Invalid {
                        curve: curve.id,
                        reason: "duplicate anchor".into(),
                    });
                }
                curves.push(curve);
            }
            kind => {
                let (_, curve) = open
                    .as_mut()
                    .ok_or_else(|| parse_err(format!("`{kind}` outside a curve block")))?;
                let atom = match kind {
                    "pmin" => ConstraintAtom::PMin(nums(1)?[0]),
                    "pmax" => ConstraintAtom::PMax(nums(1)?[0]),
                    "qmax" => ConstraintAtom::QMax(nums(1)?[0]),
                    "parabola" => {
                        let c = nums(3)?;
                        ConstraintAtom::ParabolaCap { c0: c[0], c1: c[1], c2: c[2] }
                    }
                    "disk" => {
                        let (radius_tok, sector) = match tokens.len() {
                            2 => (tokens[1], DiskSector::All),
                            3 => {
                                let sector = match tokens[2] {
                                    "all" => DiskSector::All,
                                    "upper" => DiskSector::UpperQ,
                                    "lower" => DiskSector::LowerQ,
                                    other => return Err(parse_err(format!("unknown disk sector `{other}`"))),
                                };
                                (tokens[1], sector)
                            }
                            _ => return Err(parse_err("expected `disk <radius> [all|upper|lower]`".into())),
                        };
                        let radius = parse_number(radius_tok).map_err(|e| parse_err(e.to_string()))?;
                        ConstraintAtom::Disk { radius, sector }
                    }
                    other => return Err(parse_err(format!("unknown constraint kind `{other}`"))),
                };
                curve.atoms.push(atom);
            }
        }
    }

    if let Some((line, curve)) = open {
        return Err(CurveError::Parse { line, message: format!("curve `{}` is missing `end`", curve.id) });
    }
    Ok(curves)
}

/// The loaded curve library, looked up by anchor.
#[derive(Debug, Clone, PartialEq)]
pub struct CurveSet {
    curves: Vec<CapabilityCurve>,
}

impl CurveSet {
    pub fn new(curves: Vec<CapabilityCurve>) -> Self {
        CurveSet { curves }
    }

    /// The curve library shipped in `data/curves.txt`.
    pub fn builtin() -> Self {
        BUILTIN_CURVES.parse().expect("shipped curve file is valid")
    }

    pub fn get(&self, key: CurveKey) -> Result<&CapabilityCurve, CurveError> {
        self.curves.iter().find(|c| c.key() == key).ok_or(CurveError::MissingCurve(key))
    }

    pub fn curves(&self) -> &[CapabilityCurve] {
        &self.curves
    }

    /// Builds the region for a selection, looking up every selected curve.
    pub fn region(&self, selection: &CurveSelection, shrink: f64) -> Result<FeasibleRegion, CurveError> {
        let curves = selection
            .keys()
            .map(|k| self.get(k))
            .collect::<Result<Vec<_>, _>>()?;
        build_region(&curves, shrink)
    }
}

impl FromStr for CurveSet {
    type Err = CurveError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        load_curves(s).map(CurveSet::new)
    }
}

const BUILTIN_CURVES: &str = include_str!("../data/curves.txt");

/// DC-bus voltage ranges over which one curve is assumed to hold.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum DcRange {
    /// (500, 550] V
    Low,
    /// (550, 600] V
    Mid,
    /// (600, 800] V
    High,
}

impl DcRange {
    pub const ALL: [DcRange; 3] = [DcRange::Low, DcRange::Mid, DcRange::High];

    /// Half-open interval `(lo, hi]`.
    pub fn bounds(self) -> (f64, f64) {
        match self {
            DcRange::Low => (500.0, 550.0),
            DcRange::Mid => (550.0, 600.0),
            DcRange::High => (600.0, 800.0),
        }
    }

    pub fn contains(self, vdc: f64) -> bool {
        let (lo, hi) = self.bounds();
        vdc > lo && vdc <= hi
    }

    pub fn classify(vdc: f64) -> Option<DcRange> {
        DcRange::ALL.into_iter().find(|r| r.contains(vdc))
    }

    /// The lower anchor of the range: the curve with the smaller Q cap.
    pub fn curve(self) -> CurveKey {
        match self {
            DcRange::Low => CurveKey::new(500, 300),
            DcRange::Mid => CurveKey::new(550, 300),
            DcRange::High => CurveKey::new(600, 300),
        }
    }
}

/// AC (LV side, phase-to-phase) voltage ranges.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum AcRange {
    /// (270, 330] V
    Nominal,
    /// (330, inf) V
    High,
    /// (0, 270] V. Not covered by the characterised ranges; handled by
    /// clamping to the 270 V curve.
    Low,
}

impl AcRange {
    pub const ALL: [AcRange; 3] = [AcRange::Nominal, AcRange::High, AcRange::Low];

    pub fn bounds(self) -> (f64, f64) {
        match self {
            AcRange::Nominal => (270.0, 330.0),
            AcRange::High => (330.0, f64::INFINITY),
            AcRange::Low => (0.0, 270.0),
        }
    }

    pub fn contains(self, vac: f64) -> bool {
        let (lo, hi) = self.bounds();
        vac > lo && vac <= hi
    }

    pub fn classify(vac: f64) -> Option<AcRange> {
        AcRange::ALL.into_iter().find(|r| r.contains(vac))
    }

    /// Curve intersected with the DC-selected one, if any.
    pub fn extra_curve(self) -> Option<CurveKey> {
        match self {
            AcRange::Nominal => None,
            AcRange::High => Some(CurveKey::new(500, 330)),
            AcRange::Low => Some(CurveKey::new(500, 270)),
        }
    }
}

/// Curves chosen for one (DC range, AC range) assumption.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CurveSelection {
    pub dc: CurveKey,
    pub ac: Option<CurveKey>,
    /// Raised when the AC voltage fell below the characterised ranges.
    pub clamped: bool,
}

impl CurveSelection {
    pub fn for_ranges(dc: DcRange, ac: AcRange) -> Self {
        CurveSelection { dc: dc.curve(), ac: ac.extra_curve(), clamped: ac == AcRange::Low }
    }

    pub fn keys(&self) -> impl Iterator<Item = CurveKey> {
        std::iter::once(self.dc).chain(self.ac)
    }
}

pub fn select_curves(vdc: f64, vac: f64) -> Result<CurveSelection, CurveError> {
    if !(vac > 0.0) {
        return Err(CurveError::AcNotPositive { vac });
    }
    let dc = DcRange::classify(vdc).ok_or(CurveError::DcOutOfRange { vdc })?;
    let ac = AcRange::classify(vac).expect("AC ranges cover (0, inf)");
    Ok(CurveSelection::for_ranges(dc, ac))
}

/// Intersection of one or two curves, split at Q = 0 into convex cells and
/// scaled about the origin by `shrink`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeasibleRegion {
    pub upper_cell: Vec<ConstraintAtom>,
    pub lower_cell: Vec<ConstraintAtom>,
    pub shrink: f64,
    pub curve_ids: Vec<String>,
}

pub fn build_region(curves: &[&CapabilityCurve], shrink: f64) -> Result<FeasibleRegion, CurveError> {
    if curves.is_empty() || curves.len() > 2 {
        return Err(CurveError::CurveCount(curves.len()));
    }
    if !(shrink > 0.0 && shrink <= 1.0) {
        return Err(CurveError::BadShrink(shrink));
    }
    let atoms = || curves.iter().flat_map(|c| c.atoms.iter().copied());
    Ok(FeasibleRegion {
        upper_cell: atoms().filter(|a| a.applies_to(Cell::Upper)).collect(),
        lower_cell: atoms().filter(|a| a.applies_to(Cell::Lower)).collect(),
        shrink,
        curve_ids: curves.iter().map(|c| c.id.clone()).collect(),
    })
}

impl FeasibleRegion {
    /// Unscaled atoms of one cell.
    pub fn cell(&self, cell: Cell) -> &[ConstraintAtom] {
        match cell {
            Cell::Upper => &self.upper_cell,
            Cell::Lower => &self.lower_cell,
        }
    }

    /// Atoms of one cell with the shrink factor folded in.
    pub fn scaled_cell(&self, cell: Cell) -> Vec<ConstraintAtom> {
        self.cell(cell).iter().map(|a| a.scaled(self.shrink)).collect()
    }

    pub fn cell_contains(&self, cell: Cell, p: f64, q: f64) -> bool {
        let (p, q) = (p / self.shrink, q / self.shrink);
        let sign_ok = match cell {
            Cell::Upper => q >= -MEMBERSHIP_TOL,
            Cell::Lower => q <= MEMBERSHIP_TOL,
        };
        sign_ok && self.cell(cell).iter().all(|a| a.holds(p, q))
    }

    pub fn contains(&self, p: f64, q: f64) -> bool {
        if q > 0.0 {
            self.cell_contains(Cell::Upper, p, q)
        } else if q < 0.0 {
            self.cell_contains(Cell::Lower, p, q)
        } else {
            self.cell_contains(Cell::Upper, p, q) || self.cell_contains(Cell::Lower, p, q)
        }
    }

    pub fn label(&self) -> String {
        self.curve_ids.join("+")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn builtin() -> CurveSet {
        CurveSet::builtin()
    }

    fn region(keys: &[CurveKey], shrink: f64) -> FeasibleRegion {
        let set = builtin();
        let curves: Vec<_> = keys.iter().map(|k| set.get(*k).unwrap()).collect();
        build_region(&curves, shrink).unwrap()
    }

    #[test]
    fn loads_all_five_curves() {
        let set = builtin();
        assert_eq!(set.curves().len(), 5);
        let c = set.get(CurveKey::new(600, 300)).unwrap();
        assert_eq!(
            c.atoms,
            vec![
                ConstraintAtom::PMin(-681.89),
                ConstraintAtom::PMax(678.71),
                ConstraintAtom::Disk { radius: 723.03, sector: DiskSector::UpperQ },
                ConstraintAtom::Disk { radius: 719.19, sector: DiskSector::LowerQ },
                ConstraintAtom::ParabolaCap { c0: 659.67, c1: -8.29e-18, c2: -2.16e-4 },
                ConstraintAtom::QMax(657.1),
            ]
        );
        let c = set.get(CurveKey::new(500, 330)).unwrap();
        assert_eq!(c.atoms.len(), 4);
        assert!(c.atoms.contains(&ConstraintAtom::QMax(38.47)));
    }

    #[test]
    fn empty_document_is_empty_list() {
        assert_eq!(load_curves("").unwrap(), vec![]);
        assert_eq!(load_curves("# only a comment\n\n").unwrap(), vec![]);
    }

    #[test]
    fn malformed_atom_names_line() {
        let src = "curve x 600 300\n  pmin -1\n  pmax one\nend\n";
        match load_curves(src) {
            Err(CurveError::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
        let src = "curve x 600 300\n  wedge 4\nend\n";
        assert!(matches!(load_curves(src), Err(CurveError::Parse { line: 2, .. })));
        let src = "curve x 600 300\n  pmin -1\n";
        assert!(matches!(load_curves(src), Err(CurveError::Parse { line: 1, .. })));
    }

    #[test]
    fn invariant_violations_are_validation_errors() {
        let cases = [
            "curve x 600 300\n disk -5\nend\n",
            "curve x 600 300\n parabola 10 0 0.1\nend\n",
            "curve x 600 300\n pmin 5\n pmax 1\nend\n",
            "curve x 600 300\n qmax -3\nend\n",
            "curve x 610 300\n qmax 3\nend\n",
            "curve x 600 300\nend\n",
            "curve x 600 300\n qmax 3\nend\ncurve y 600 300\n qmax 4\nend\n",
        ];
        for src in cases {
            assert!(matches!(load_curves(src), Err(CurveError::Invalid { .. })), "{src}");
        }
    }

    #[test]
    fn selection_by_range() {
        let s = select_curves(575.0, 300.0).unwrap();
        assert_eq!(s.dc, CurveKey::new(550, 300));
        assert_eq!(s.ac, None);
        assert!(!s.clamped);

        let s = select_curves(610.0, 340.0).unwrap();
        assert_eq!(s.dc, CurveKey::new(600, 300));
        assert_eq!(s.ac, Some(CurveKey::new(500, 330)));

        let s = select_curves(520.0, 250.0).unwrap();
        assert_eq!(s.dc, CurveKey::new(500, 300));
        assert_eq!(s.ac, Some(CurveKey::new(500, 270)));
        assert!(s.clamped);

        assert_eq!(select_curves(600.0, 330.0).unwrap().dc, CurveKey::new(550, 300));
        assert_eq!(select_curves(800.0, 300.0).unwrap().dc, CurveKey::new(600, 300));
    }

    #[test]
    fn selection_out_of_range() {
        assert!(matches!(select_curves(500.0, 300.0), Err(CurveError::DcOutOfRange { .. })));
        assert!(matches!(select_curves(800.5, 300.0), Err(CurveError::DcOutOfRange { .. })));
        assert!(matches!(select_curves(700.0, 0.0), Err(CurveError::AcNotPositive { .. })));
    }

    #[test]
    fn origin_always_member() {
        for key in KNOWN_ANCHORS {
            assert!(region(&[key], 1.0).contains(0.0, 0.0));
            assert!(region(&[key], 0.1).contains(0.0, 0.0));
        }
    }

    #[test]
    fn shrink_scales_pmax_boundary() {
        let r = region(&[CurveKey::new(600, 300)], 7.0 / 9.0);
        assert!(!r.contains(678.71, 0.0));
        assert!(r.contains(678.71 * 7.0 / 9.0, 0.0));
    }

    #[test]
    fn ac_curve_qmax_binds_in_intersection() {
        let r = region(&[CurveKey::new(600, 300), CurveKey::new(500, 330)], 1.0);
        assert!(!r.contains(0.0, 100.0));
        assert!(r.contains(0.0, 38.0));
    }

    #[test]
    fn qmax_boundary() {
        let r = region(&[CurveKey::new(600, 300)], 1.0);
        assert!(r.contains(0.0, 657.1));
        assert!(!r.contains(0.0, 657.2));
    }

    #[test]
    fn split_disk_radii() {
        let r = region(&[CurveKey::new(600, 300)], 1.0);
        // Within pmax but between the two disk radii, below the axis.
        let q = -(719.5f64.powi(2) - 678.0f64.powi(2)).sqrt();
        assert!(!r.contains(678.0, q));
        let q = -(719.0f64.powi(2) - 678.0f64.powi(2)).sqrt();
        assert!(r.contains(678.0, q));
    }

    #[test]
    fn qmax_nesting_along_dc_anchors() {
        let set = builtin();
        let qmax = |k| {
            set.get(k)
                .unwrap()
                .atoms
                .iter()
                .find_map(|a| match a {
                    ConstraintAtom::QMax(v) => Some(*v),
                    _ => None,
                })
                .unwrap()
        };
        let (a, b, c) = (qmax(CurveKey::new(600, 300)), qmax(CurveKey::new(550, 300)), qmax(CurveKey::new(500, 300)));
        assert!(a > b && b > c);
        assert_eq!((a, b, c), (657.1, 439.98, 225.22));
    }

    #[test]
    fn region_argument_checks() {
        let set = builtin();
        let c = set.get(CurveKey::new(600, 300)).unwrap();
        assert!(matches!(build_region(&[], 1.0), Err(CurveError::CurveCount(0))));
        assert!(matches!(build_region(&[c, c, c], 1.0), Err(CurveError::CurveCount(3))));
        assert!(matches!(build_region(&[c], 0.0), Err(CurveError::BadShrink(_))));
        assert!(matches!(build_region(&[c], 1.5), Err(CurveError::BadShrink(_))));
    }

    fn any_region() -> impl Strategy<Value = FeasibleRegion> {
        let pairs = vec![
            vec![CurveKey::new(600, 300)],
            vec![CurveKey::new(550, 300)],
            vec![CurveKey::new(500, 300)],
            vec![CurveKey::new(600, 300), CurveKey::new(500, 330)],
            vec![CurveKey::new(550, 300), CurveKey::new(500, 270)],
            vec![CurveKey::new(500, 270)],
        ];
        (proptest::sample::select(pairs), 0.1f64..=1.0).prop_map(|(keys, s)| region(&keys, s))
    }

    proptest! {
        #[test]
        fn cells_are_convex(
            r in any_region(),
            upper in any::<bool>(),
            a in (-800.0f64..800.0, 0.0f64..800.0),
            b in (-800.0f64..800.0, 0.0f64..800.0),
            t in 0.0f64..=1.0,
        ) {
            let cell = if upper { Cell::Upper } else { Cell::Lower };
            let sgn = if upper { 1.0 } else { -1.0 };
            let (pa, qa) = (a.0, sgn * a.1);
            let (pb, qb) = (b.0, sgn * b.1);
            if r.cell_contains(cell, pa, qa) && r.cell_contains(cell, pb, qb) {
                let (p, q) = (pa + t * (pb - pa), qa + t * (qb - qa));
                prop_assert!(r.cell_contains(cell, p, q));
            }
        }

        #[test]
        fn shrink_is_monotone(
            keys in proptest::sample::select(KNOWN_ANCHORS.to_vec()),
            s in 0.05f64..=1.0,
            s2 in 0.05f64..=1.0,
            p in -800.0f64..800.0,
            q in -800.0f64..800.0,
        ) {
            let r = region(&[keys], s);
            let r2 = region(&[keys], s2);
            if r.contains(p, q) {
                prop_assert!(r2.contains(p * s2 / s, q * s2 / s));
            }
        }
    }
}
