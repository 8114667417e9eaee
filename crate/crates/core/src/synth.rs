//! Seeded generator of synthetic DEXPI documents for tests and benchmarks.
//!
//! A document is a chain of tagged equipment fed from an off-page inlet and
//! drained to an off-page outlet, plus random extra lines between equipment
//! (branches and recycles). Every line runs nozzle to nozzle through pipes,
//! valves and flanges. Control loops measure one equipment item and actuate
//! one valve.

use std::fmt::Write as _;

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const EQUIPMENT: &[&str] = &[
    "Tank",
    "CentrifugalPump",
    "ReciprocatingPump",
    "PlateHeatExchanger",
    "TubularHeatExchanger",
    "Vessel",
    "Filter",
];
const VALVES: &[&str] = &["GlobeValve", "BallValve", "GateValve", "SwingCheckValve", "ButterflyValve"];
const FITTINGS: &[&str] = &["Flange"];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SynthParams {
    pub seed: u64,
    /// Equipment items on the main line.
    pub equipment: usize,
    /// Additional lines between random equipment pairs.
    pub extra_lines: usize,
    /// Upper bound on in-line components per line.
    pub max_components: usize,
    /// Control loops.
    pub loops: usize,
}

impl SynthParams {
    pub fn new(seed: u64) -> Self {
        SynthParams {
            seed,
            equipment: 5,
            extra_lines: 2,
            max_components: 3,
            loops: 2,
        }
    }

    /// Roughly `scale` times the size of [`SynthParams::new`].
    pub fn scaled(seed: u64, scale: usize) -> Self {
        let s = scale.max(1);
        SynthParams {
            seed,
            equipment: 5 * s,
            extra_lines: 2 * s,
            max_components: 3,
            loops: 2 * s,
        }
    }
}

struct Writer {
    rng: ChaCha8Rng,
    out: String,
    next_id: usize,
    valves: Vec<String>,
    /// (equipment id, tag)
    equipment: Vec<(String, String)>,
    nozzles: Vec<Vec<(String, String)>>,
}

impl Writer {
    fn id(&mut self, base: &str) -> String {
        self.next_id += 1;
        format!("{base}-{}", self.next_id)
    }

    fn attr(&mut self, name: &str, value: &str, units: Option<&str>) {
        let units = units.map(|u| format!(" Units=\"{u}\"")).unwrap_or_default();
        let _ = writeln!(
            self.out,
            "      <GenericAttribute Name=\"{name}\" Format=\"string\" Value=\"{value}\"{units}/>"
        );
    }

    fn ports(&mut self, owner: &str, n: usize, flow: bool) -> Vec<String> {
        let dir = if flow { " FlowIn=\"1\" FlowOut=\"2\"" } else { "" };
        let _ = writeln!(self.out, "    <ConnectionPoints NumPoints=\"{}\"{dir}>", n + 1);
        let _ = writeln!(self.out, "      <Node ID=\"{owner}-node0\"/>");
        let mut ids = Vec::new();
        for k in 1..=n {
            let id = format!("{owner}-node{k}");
            let _ = writeln!(self.out, "      <Node ID=\"{id}\" Type=\"process\"/>");
            ids.push(id);
        }
        self.out.push_str("    </ConnectionPoints>\n");
        ids
    }
}

/// Generates one document. Equal parameters give identical text.
pub fn synth_dexpi(params: &SynthParams) -> String {
    let mut w = Writer {
        rng: ChaCha8Rng::seed_from_u64(params.seed),
        out: String::new(),
        next_id: 0,
        valves: Vec::new(),
        equipment: Vec::new(),
        nozzles: Vec::new(),
    };
    let n = params.equipment.max(1);

    // Lines: inlet -> E0 -> ... -> En-1 -> outlet, plus extras.
    let mut lines: Vec<(Option<usize>, Option<usize>)> = Vec::new();
    lines.push((None, Some(0)));
    for i in 1..n {
        lines.push((Some(i - 1), Some(i)));
    }
    lines.push((Some(n - 1), None));
    for _ in 0..params.extra_lines {
        if n < 2 {
            break;
        }
        let a = w.rng.random_range(0..n);
        let mut b = w.rng.random_range(0..n - 1);
        if b >= a {
            b += 1;
        }
        lines.push((Some(a), Some(b)));
    }

    // Nozzle slots per equipment: one per line end.
    let mut slots = vec![0usize; n];
    for (a, b) in &lines {
        for e in [a, b].into_iter().flatten() {
            slots[*e] += 1;
        }
    }

    w.out.push_str("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n<PlantModel>\n");
    w.out.push_str("  <PlantInformation SchemaVersion=\"4.1.1\" OriginatingSystem=\"synth\" Application=\"synth\"/>\n");

    for (i, &count) in slots.iter().enumerate() {
        let class = *EQUIPMENT.choose(&mut w.rng).unwrap_or(&"Vessel");
        let id = format!("Equipment-{i}");
        let tag = format!("E{}", 100 + i);
        let _ = writeln!(w.out, "  <Equipment ID=\"{id}\" ComponentClass=\"{class}\">");
        w.out.push_str("    <GenericAttributes Set=\"DexpiAttributes\">\n");
        w.attr("TagNameAssignmentClass", &tag, None);
        if w.rng.random_bool(0.5) {
            let p = w.rng.random_range(2..40).to_string();
            w.attr("UpperLimitDesignPressure", &p, Some("Bar"));
        }
        w.out.push_str("    </GenericAttributes>\n");
        if w.rng.random_bool(0.5) {
            let cid = w.id("Chamber");
            let t = w.rng.random_range(50..300).to_string();
            let _ = writeln!(w.out, "    <Equipment ID=\"{cid}\" ComponentClass=\"Chamber\">");
            w.out.push_str("    <GenericAttributes Set=\"DexpiAttributes\">\n");
            w.attr("UpperLimitDesignTemperature", &t, Some("DegreeCelsius"));
            w.out.push_str("    </GenericAttributes>\n    </Equipment>\n");
        }
        let mut nozzles = Vec::new();
        for _ in 0..count {
            let nid = w.id("Nozzle");
            let _ = writeln!(w.out, "    <Nozzle ID=\"{nid}\" ComponentClass=\"Nozzle\">");
            w.ports(&nid, 1, false);
            w.out.push_str("    </Nozzle>\n");
            nozzles.push((nid.clone(), format!("{nid}-node1")));
        }
        w.out.push_str("  </Equipment>\n");
        w.equipment.push((id, tag));
        w.nozzles.push(nozzles);
    }

    let mut used = vec![0usize; n];
    for (line_no, (a, b)) in lines.iter().enumerate() {
        let system = format!("PipingNetworkSystem-{line_no}");
        let segment = format!("PipingNetworkSegment-{line_no}");
        let line_tag = format!("L{}", 1000 + line_no);
        let _ = writeln!(w.out, "  <PipingNetworkSystem ID=\"{system}\" ComponentClass=\"PipingNetworkSystem\">");
        w.out.push_str("    <GenericAttributes Set=\"DexpiAttributes\">\n");
        w.attr("LineNumberAssignmentClass", &line_tag, None);
        w.out.push_str("    </GenericAttributes>\n");
        let _ = writeln!(w.out, "  <PipingNetworkSegment ID=\"{segment}\" ComponentClass=\"PipingNetworkSegment\">");

        let mut endpoint = |e: Option<usize>, w: &mut Writer, inlet: bool| -> String {
            match e {
                Some(e) => {
                    let nozzle = w.nozzles[e][used[e]].0.clone();
                    used[e] += 1;
                    nozzle
                }
                None => {
                    let (class, base) = if inlet {
                        ("FlowInPipeOffPageConnector", "InletConnector")
                    } else {
                        ("FlowOutPipeOffPageConnector", "OutletConnector")
                    };
                    let id = w.id(base);
                    let _ = writeln!(w.out, "    <PipeOffPageConnector ID=\"{id}\" ComponentClass=\"{class}\">");
                    w.ports(&id, 1, false);
                    w.out.push_str("    </PipeOffPageConnector>\n");
                    id
                }
            }
        };
        let from = endpoint(*a, &mut w, true);
        let to = endpoint(*b, &mut w, false);

        let components = if params.max_components == 0 {
            0
        } else {
            w.rng.random_range(0..=params.max_components)
        };
        w.out.push_str("    <CenterLine NumPoints=\"2\"><Coordinate X=\"0\" Y=\"0\"/><Coordinate X=\"1\" Y=\"0\"/></CenterLine>\n");
        for c in 0..components {
            let valve = w.rng.random_bool(0.7);
            let class = if valve {
                *VALVES.choose(&mut w.rng).unwrap_or(&"GlobeValve")
            } else {
                *FITTINGS.choose(&mut w.rng).unwrap_or(&"Flange")
            };
            let id = w.id(class);
            let _ = writeln!(w.out, "    <PipingComponent ID=\"{id}\" ComponentClass=\"{class}\">");
            if valve {
                w.out.push_str("    <GenericAttributes Set=\"DexpiAttributes\">\n");
                let number = format!("V{c}{}", w.next_id);
                w.attr("PipingComponentNumberAssignmentClass", &number, None);
                w.out.push_str("    </GenericAttributes>\n");
                w.valves.push(id.clone());
            }
            w.ports(&id, 2, true);
            w.out.push_str("    </PipingComponent>\n");
            // Components may touch directly, without a pipe in between.
            if w.rng.random_bool(0.75) || c + 1 == components {
                w.out.push_str("    <CenterLine NumPoints=\"2\"><Coordinate X=\"0\" Y=\"0\"/><Coordinate X=\"1\" Y=\"0\"/></CenterLine>\n");
            }
        }
        let _ = writeln!(
            w.out,
            "    <Connection FromID=\"{from}\" FromNode=\"1\" ToID=\"{to}\" ToNode=\"1\"/>"
        );
        w.out.push_str("  </PipingNetworkSegment>\n  </PipingNetworkSystem>\n");
    }

    for l in 0..params.loops {
        let Some(valve) = w.valves.choose(&mut w.rng).cloned() else {
            break;
        };
        let e = w.rng.random_range(0..n);
        let (measured, tag) = w.equipment[e].clone();
        let number = format!("{}.{l:02}", &tag[1..]);
        let _ = writeln!(w.out, "  <ActuatingSystem ID=\"ActuatingSystem-{l}\" ComponentClass=\"ActuatingSystem\">");
        let _ = writeln!(
            w.out,
            "    <ActuatingSystemComponent ID=\"OperatedValveReference-{l}\" ComponentClass=\"OperatedValveReference\">\n      <Association Type=\"refers to\" ItemID=\"{valve}\"/>\n    </ActuatingSystemComponent>"
        );
        w.out.push_str("  </ActuatingSystem>\n");
        let _ = writeln!(
            w.out,
            "  <ProcessInstrumentationFunction ID=\"ProcessInstrumentationFunction-{l}\" ComponentClass=\"ProcessInstrumentationFunction\">"
        );
        w.out.push_str("    <GenericAttributes Set=\"DexpiAttributes\">\n");
        w.attr("ProcessInstrumentationFunctionCategoryAssignmentClass", "T", None);
        w.attr("ProcessInstrumentationFunctionsAssignmentClass", "IC", None);
        w.attr("ProcessInstrumentationFunctionNumberAssignmentClass", &number, None);
        w.out.push_str("    </GenericAttributes>\n");
        let _ = writeln!(
            w.out,
            "    <InformationFlow ID=\"MeasuringLineFunction-{l}\" ComponentClass=\"MeasuringLineFunction\">\n      <Association Type=\"has logical start\" ItemID=\"ProcessSignalGeneratingFunction-{l}\"/>\n      <Association Type=\"has logical end\" ItemID=\"ProcessInstrumentationFunction-{l}\"/>\n    </InformationFlow>"
        );
        let _ = writeln!(
            w.out,
            "    <InformationFlow ID=\"SignalConveyingFunction-{l}\" ComponentClass=\"SignalConveyingFunction\">\n      <Association Type=\"has logical start\" ItemID=\"ProcessInstrumentationFunction-{l}\"/>\n      <Association Type=\"has logical end\" ItemID=\"ActuatingFunction-{l}\"/>\n    </InformationFlow>"
        );
        let _ = writeln!(
            w.out,
            "    <ActuatingFunction ID=\"ActuatingFunction-{l}\" ComponentClass=\"ActuatingFunction\">\n    <GenericAttributes Set=\"DexpiAttributes\">\n      <GenericAttribute Name=\"ActuatingFunctionNumberAssignmentClass\" Value=\"TV{number}\"/>\n    </GenericAttributes>\n      <Association Type=\"is fulfilled by\" ItemID=\"ActuatingSystem-{l}\"/>\n    </ActuatingFunction>"
        );
        let _ = writeln!(
            w.out,
            "    <ProcessSignalGeneratingFunction ID=\"ProcessSignalGeneratingFunction-{l}\" ComponentClass=\"ProcessSignalGeneratingFunction\">\n    <GenericAttributes Set=\"DexpiAttributes\">\n      <GenericAttribute Name=\"ProcessSignalGeneratingFunctionNumberAssignmentClass\" Value=\"TT{number}\"/>\n    </GenericAttributes>\n      <Association Type=\"is located in\" ItemID=\"{measured}\"/>\n    </ProcessSignalGeneratingFunction>"
        );
        w.out.push_str("  </ProcessInstrumentationFunction>\n");
    }
    w.out.push_str("</PlantModel>\n");
    w.out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dexpi::{parse_dexpi_with, ParseOptions};

    #[test]
    fn deterministic() {
        let p = SynthParams::new(7);
        assert_eq!(synth_dexpi(&p), synth_dexpi(&p));
        assert_ne!(synth_dexpi(&p), synth_dexpi(&SynthParams::new(8)));
    }

    #[test]
    fn parses_strictly() {
        for seed in 0..20 {
            let text = synth_dexpi(&SynthParams::new(seed));
            let out = parse_dexpi_with(&text, ParseOptions { strict: true }).unwrap();
            assert!(out.model.count_class("FlowInPipeOffPageConnector") == 1);
            assert!(!out.model.piping_connections.is_empty());
        }
    }
}
