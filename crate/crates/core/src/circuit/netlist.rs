//! Line-oriented SPICE-subset netlists.
//!
//! Grammar (one item per line):
//!
//! ```text
//! * thermoflow <star|crossbar> netlist sha256:<16 hex digits>
//! R<name> <node+> <node-> <ohms>
//! V<name> <node+> <node-> DC <volts>
//! .end
//! ```
//!
//! Numbers use Rust's shortest round-trip exponent form (`5e-1`, `1e0`).
//! Node `0` is ground. The hash covers every card line (each terminated by
//! `\n`) between the header and `.end`.
//!
//! Star circuits use nodes `n_center` and `n_res<j>`; resistors `R<j>`,
//! sources `V<j>`. Crossbars use mode bars `b_<κ>`, reservoir bars `c_<j>`
//! and junctions `x_<κ>_<j>`; each branch is `RS_<κ>_<j>` (series
//! resistor, or the zero-volt source `VS_<κ>_<j>` when r = 0) followed by
//! `RB_<κ>_<j>` from junction to mode bar, and bar sources `VC_<j>`.
//! Open and absent branches are omitted.

use std::fmt::Write as _;
use std::str::FromStr;

use sha2::{Digest, Sha256};

use super::crossbar::{BranchState, CrossbarCircuit};
use super::star::StarCircuit;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NetlistFormat {
    Spice,
}

impl FromStr for NetlistFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "spice" => Ok(NetlistFormat::Spice),
            other => Err(Error::UnsupportedFormat(other.to_string())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NetlistKind {
    Star,
    Crossbar,
}

impl NetlistKind {
    fn tag(self) -> &'static str {
        match self {
            NetlistKind::Star => "star",
            NetlistKind::Crossbar => "crossbar",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Card {
    Resistor {
        name: String,
        pos: String,
        neg: String,
        ohms: f64,
    },
    Source {
        name: String,
        pos: String,
        neg: String,
        volts: f64,
    },
}

impl Card {
    fn render(&self, out: &mut String) {
        match self {
            Card::Resistor {
                name,
                pos,
                neg,
                ohms,
            } => writeln!(out, "R{name} {pos} {neg} {ohms:e}"),
            Card::Source {
                name,
                pos,
                neg,
                volts,
            } => writeln!(out, "V{name} {pos} {neg} DC {volts:e}"),
        }
        .expect("writing to a String cannot fail");
    }

    fn parse(line: &str, line_no: usize) -> Result<Card> {
        let err = |message: String| Error::Parse {
            line: line_no,
            message,
        };
        let fields: Vec<&str> = line.split_whitespace().collect();
        let number = |s: &str| {
            s.parse::<f64>()
                .map_err(|_| err(format!("invalid number '{s}'")))
        };
        let (head, rest) = line.split_at(1);
        let name = rest
            .split_whitespace()
            .next()
            .ok_or_else(|| err("missing element name".into()))?
            .to_string();
        match head {
            "R" if fields.len() == 4 => Ok(Card::Resistor {
                name,
                pos: fields[1].into(),
                neg: fields[2].into(),
                ohms: number(fields[3])?,
            }),
            "V" if fields.len() == 5 && fields[3] == "DC" => Ok(Card::Source {
                name,
                pos: fields[1].into(),
                neg: fields[2].into(),
                volts: number(fields[4])?,
            }),
            _ => Err(err(format!("unsupported card '{line}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Netlist {
    pub kind: NetlistKind,
    pub cards: Vec<Card>,
}

impl Netlist {
    pub fn from_star(star: &StarCircuit) -> Netlist {
        let mut cards = Vec::new();
        for (&j, &r) in star.terminals().iter().zip(star.resistances()) {
            cards.push(Card::Resistor {
                name: j.to_string(),
                pos: format!("n_res{j}"),
                neg: "n_center".into(),
                ohms: r,
            });
        }
        for (&j, &phi) in star.terminals().iter().zip(star.potentials()) {
            cards.push(Card::Source {
                name: j.to_string(),
                pos: format!("n_res{j}"),
                neg: "0".into(),
                volts: phi,
            });
        }
        Netlist {
            kind: NetlistKind::Star,
            cards,
        }
    }

    pub fn from_crossbar(crossbar: &CrossbarCircuit) -> Netlist {
        let mut cards = Vec::new();
        for k in 0..crossbar.modes() {
            for j in 0..crossbar.bars() {
                match crossbar.branch_states[k][j] {
                    BranchState::Open | BranchState::Absent => continue,
                    BranchState::Active | BranchState::PassThrough => {}
                }
                let junction = format!("x_{k}_{j}");
                let r = crossbar.series_resistors[k][j];
                if r == 0.0 {
                    cards.push(Card::Source {
                        name: format!("S_{k}_{j}"),
                        pos: format!("c_{j}"),
                        neg: junction.clone(),
                        volts: 0.0,
                    });
                } else {
                    cards.push(Card::Resistor {
                        name: format!("S_{k}_{j}"),
                        pos: format!("c_{j}"),
                        neg: junction.clone(),
                        ohms: r,
                    });
                }
                cards.push(Card::Resistor {
                    name: format!("B_{k}_{j}"),
                    pos: junction,
                    neg: format!("b_{k}"),
                    ohms: 1.0 / crossbar.conductances[k][j],
                });
            }
        }
        for (j, &phi) in crossbar.bar_potentials.iter().enumerate() {
            cards.push(Card::Source {
                name: format!("C_{j}"),
                pos: format!("c_{j}"),
                neg: "0".into(),
                volts: phi,
            });
        }
        Netlist {
            kind: NetlistKind::Crossbar,
            cards,
        }
    }

    fn body(&self) -> String {
        let mut body = String::new();
        for card in &self.cards {
            card.render(&mut body);
        }
        body
    }

    fn digest(body: &str) -> String {
        hex::encode(&Sha256::digest(body.as_bytes())[..8])
    }

    pub fn render(&self) -> String {
        let body = self.body();
        format!(
            "* thermoflow {} netlist sha256:{}\n{body}.end\n",
            self.kind.tag(),
            Self::digest(&body)
        )
    }

    /// Parse a netlist produced by [`Netlist::render`], checking its hash.
    pub fn parse(text: &str) -> Result<Netlist> {
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
        let (_, header) = lines.next().ok_or(Error::Parse {
            line: 1,
            message: "empty netlist".into(),
        })?;
        let header_err = |message: &str| Error::Parse {
            line: 1,
            message: message.into(),
        };
        let rest = header
            .strip_prefix("* thermoflow ")
            .ok_or_else(|| header_err("missing thermoflow header"))?;
        let (tag, hash) = rest
            .split_once(" netlist sha256:")
            .ok_or_else(|| header_err("malformed header"))?;
        let kind = match tag {
            "star" => NetlistKind::Star,
            "crossbar" => NetlistKind::Crossbar,
            _ => return Err(header_err("unknown netlist kind")),
        };
        let mut cards = Vec::new();
        let mut ended = false;
        for (no, line) in lines {
            if ended {
                return Err(Error::Parse {
                    line: no,
                    message: "content after .end".into(),
                });
            }
            if line == ".end" {
                ended = true;
            } else {
                cards.push(Card::parse(line, no)?);
            }
        }
        if !ended {
            return Err(Error::Parse {
                line: text.lines().count(),
                message: "missing .end".into(),
            });
        }
        let netlist = Netlist { kind, cards };
        if Self::digest(&netlist.body()) != hash {
            return Err(header_err("hash does not match netlist body"));
        }
        Ok(netlist)
    }
}

/// Either kind of circuit, for export.
#[derive(Debug, Clone, Copy)]
pub enum CircuitRef<'a> {
    Star(&'a StarCircuit),
    Crossbar(&'a CrossbarCircuit),
}

impl<'a> From<&'a StarCircuit> for CircuitRef<'a> {
    fn from(c: &'a StarCircuit) -> Self {
        CircuitRef::Star(c)
    }
}

impl<'a> From<&'a CrossbarCircuit> for CircuitRef<'a> {
    fn from(c: &'a CrossbarCircuit) -> Self {
        CircuitRef::Crossbar(c)
    }
}

/// Render a circuit as text in the named format (only `spice` exists).
pub fn export_netlist<'a>(circuit: impl Into<CircuitRef<'a>>, format: &str) -> Result<String> {
    let NetlistFormat::Spice = format.parse::<NetlistFormat>()?;
    let netlist = match circuit.into() {
        CircuitRef::Star(s) => Netlist::from_star(s),
        CircuitRef::Crossbar(c) => Netlist::from_crossbar(c),
    };
    Ok(netlist.render())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn smallest_star() {
        let star = StarCircuit::new(vec![1.0, 1.0], vec![0.0, 2.0]).unwrap();
        let text = export_netlist(&star, "spice").unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 6);
        assert!(lines[0].starts_with("* thermoflow star netlist sha256:"));
        assert_eq!(
            &lines[1..],
            &[
                "R0 n_res0 n_center 1e0",
                "R1 n_res1 n_center 1e0",
                "V0 n_res0 0 DC 0e0",
                "V1 n_res1 0 DC 2e0",
                ".end",
            ]
        );
    }

    #[test]
    fn unknown_format_rejected() {
        let star = StarCircuit::new(vec![1.0], vec![0.0]).unwrap();
        assert!(matches!(
            export_netlist(&star, "verilog"),
            Err(Error::UnsupportedFormat(_))
        ));
    }

    #[test]
    fn parse_rejects_tampering() {
        let star = StarCircuit::new(vec![1.0, 2.0], vec![0.0, 2.0]).unwrap();
        let text = export_netlist(&star, "spice").unwrap();
        assert!(Netlist::parse(&text.replace("2e0\n.end", "3e0\n.end")).is_err());
        assert!(Netlist::parse(&text.replace(".end\n", "")).is_err());
        assert!(Netlist::parse("R1 a b 1\n.end\n").is_err());
    }

    #[test]
    fn round_trip_is_byte_identical() {
        let star = StarCircuit::new(vec![0.1, 3.3, 1e-7], vec![1.0 / 3.0, 0.0, 2e5]).unwrap();
        let text = export_netlist(&star, "spice").unwrap();
        assert_eq!(Netlist::parse(&text).unwrap().render(), text);
    }
}
