use lineguide::ebraille::*;
use lineguide::feedback::{CommandKind, FeedbackCommand};
use proptest::prelude::*;

/// Standard literary letters a-z as published, in Unicode Braille Patterns.
const LITERARY_LETTERS: &str = "⠁⠃⠉⠙⠑⠋⠛⠓⠊⠚⠅⠇⠍⠝⠕⠏⠟⠗⠎⠞⠥⠧⠺⠭⠽⠵";

fn cmd(kind: CommandKind, strength: f64) -> FeedbackCommand {
    FeedbackCommand { kind, strength, timestamp: 0.0 }
}

#[test]
fn letters_match_the_published_table() {
    for (ch, expect) in ('a'..='z').zip(LITERARY_LETTERS.chars()) {
        for dialect in [Dialect::Six, Dialect::Eight] {
            assert_eq!(encode_char(ch, dialect).unwrap().to_unicode(), expect, "{ch}");
        }
    }
    assert_eq!(encode_char('a', Dialect::Six).unwrap(), BrailleCell::from_dots(&[1]));
    assert_eq!(encode_char(' ', Dialect::Six).unwrap(), BrailleCell::EMPTY);
    assert_eq!(decode_cell(BrailleCell::from_dots(&[1]), Dialect::Six).unwrap(), 'a');
    assert_eq!(decode_cell(BrailleCell::EMPTY, Dialect::Eight).unwrap(), ' ');
}

#[test]
fn extended_characters_need_eight_dots() {
    assert_eq!(encode_char('á', Dialect::Six), Err(BrailleError::UnsupportedCharacter('á')));
    let cell = encode_char('á', Dialect::Eight).unwrap();
    assert_eq!(cell.dots(), vec![1, 7, 8]);
    assert_eq!(encode_char('A', Dialect::Eight).unwrap().dots(), vec![1, 7]);
    assert_eq!(encode_char('β', Dialect::Eight).unwrap().dots(), vec![1, 2, 8]);
    assert!(encode_char('€', Dialect::Eight).is_err());
    assert_eq!(decode_cell(BrailleCell(0xff), Dialect::Eight), Err(BrailleError::UnknownCell(0xff)));
}

#[test]
fn tables_are_bijections() {
    for dialect in [Dialect::Six, Dialect::Eight] {
        let table = BrailleTable::builtin(dialect);
        let chars = table.charset();
        let mut cells = std::collections::HashSet::new();
        for ch in &chars {
            let cell = table.encode(*ch).unwrap();
            assert!(cells.insert(cell), "{ch} shares a cell");
            assert_eq!(table.decode(cell).unwrap(), *ch);
            if dialect == Dialect::Six {
                assert!(!cell.has(7) && !cell.has(8));
            }
        }
    }
    let six = BrailleTable::builtin(Dialect::Six).charset();
    let eight = BrailleTable::builtin(Dialect::Eight).charset();
    assert!(six.iter().all(|c| eight.contains(c)));
    for c in six {
        assert_eq!(encode_char(c, Dialect::Six), encode_char(c, Dialect::Eight));
    }
}

#[test]
fn table_parser_rejects_bad_files() {
    assert!(matches!(BrailleTable::parse("U+0061 1\nU+0062 1\n", Dialect::Six), Err(BrailleError::Table { line: 2, .. })));
    assert!(matches!(BrailleTable::parse("U+0061 17\n", Dialect::Six), Err(BrailleError::Table { line: 1, .. })));
    assert!(BrailleTable::parse("U+0061 17\n", Dialect::Eight).is_ok());
    assert!(BrailleTable::parse("0061 1\n", Dialect::Six).is_err());
    assert!(BrailleTable::parse("U+0061 19\n", Dialect::Eight).is_err());
}

#[test]
fn text_round_trips_with_capital_signs() {
    let cells = encode_text("Read 42 lines.", Dialect::Six).unwrap();
    assert_eq!(cells[0], CAPITAL_SIGN);
    assert_eq!(cells.len(), "Read 42 lines.".len() + 1);
    assert_eq!(decode_text(&cells, Dialect::Six).unwrap(), "Read 42 lines.");
    let cells = encode_text("Read", Dialect::Eight).unwrap();
    assert_eq!(cells.len(), 4);
    assert_eq!(decode_text(&cells, Dialect::Eight).unwrap(), "Read");
}

proptest! {
    #[test]
    fn six_dot_text_round_trips(s in "[a-zA-Z0-9 .,;:!?'()/-]{0,40}") {
        let cells = encode_text(&s, Dialect::Six).unwrap();
        prop_assert!(cells.iter().all(|c| !c.has(7) && !c.has(8)));
        prop_assert_eq!(decode_text(&cells, Dialect::Six).unwrap(), s);
    }

    #[test]
    fn frames_keep_fields_apart(cell in any::<u8>(), k in 0usize..5) {
        let kind = [CommandKind::Up, CommandKind::Down, CommandKind::None, CommandKind::NewLine, CommandKind::LineStart][k];
        let f = compose_frame(BrailleCell(cell), &cmd(kind, 0.5));
        prop_assert_eq!(f.cell(), BrailleCell(cell));
        prop_assert_eq!(f.side_bits(), compose_frame(BrailleCell::EMPTY, &cmd(kind, 0.5)).dots16);
    }
}

#[test]
fn command_patterns() {
    let a = encode_char('a', Dialect::Six).unwrap();
    let f = compose_frame(a, &cmd(CommandKind::None, 0.0));
    assert_eq!((f.cell(), f.side_bits()), (a, 0));
    let f = compose_frame(BrailleCell::EMPTY, &cmd(CommandKind::Up, 0.5));
    assert_eq!(f.side_dots(), vec![SideDot::L1, SideDot::L2, SideDot::R1, SideDot::R2]);
    assert_eq!(f.cell(), BrailleCell::EMPTY);
    let z = encode_char('z', Dialect::Six).unwrap();
    let f = compose_frame(z, &cmd(CommandKind::Down, 0.5));
    assert_eq!(f.cell(), z);
    assert_eq!(f.side_dots(), vec![SideDot::L3, SideDot::L4, SideDot::R3, SideDot::R4]);
    assert_eq!(compose_frame(z, &cmd(CommandKind::NewLine, 0.0)).side_dots().len(), 8);
    assert_eq!(compose_frame(z, &cmd(CommandKind::LineStart, 0.0)).side_bits(), 0);
    let alt = CommandPatterns::parse("Up R1\nDown R4\nNewLine L1 R1\nNone -\nLineStart L4\n").unwrap();
    assert_eq!(compose_frame_with(z, CommandKind::Up, &alt).side_dots(), vec![SideDot::R1]);
    assert!(CommandPatterns::parse("Up R1\n").is_err());
    assert!(CommandPatterns::parse("Up X9\nDown -\nNewLine -\nNone -\nLineStart -\n").is_err());
}

#[test]
fn electrode_layout_uses_the_dot_pitch() {
    assert_eq!(electrode_position_mm(0), Some((DOT_PITCH_X_MM, 0.0)));
    assert_eq!(electrode_position_mm(3), Some((2.0 * DOT_PITCH_X_MM, 0.0)));
    assert_eq!(electrode_position_mm(6), Some((DOT_PITCH_X_MM, 3.0 * DOT_PITCH_Y_MM)));
    assert_eq!(electrode_position_mm(SideDot::L1.bit()), Some((0.0, 0.0)));
    assert_eq!(electrode_position_mm(SideDot::R4.bit()), Some((3.0 * DOT_PITCH_X_MM, 3.0 * DOT_PITCH_Y_MM)));
    assert_eq!(electrode_position_mm(16), None);
    let mut seen = std::collections::HashSet::new();
    for i in 0..16 {
        let (x, y) = electrode_position_mm(i).unwrap();
        assert!(seen.insert(((x * 100.0).round() as i64, (y * 100.0).round() as i64)));
    }
}

#[test]
fn text_dots_pulse_at_thirty_hertz() {
    let params = StimulationParams::default();
    let frame = compose_frame(encode_char('d', Dialect::Six).unwrap(), &cmd(CommandKind::None, 0.0));
    let sched = schedule_stimulation(frame, &params, 1.0, 0.7).unwrap();
    for dot in [0, 3, 4] {
        assert_eq!(sched.pulses_for(dot), 30);
    }
    assert_eq!(sched.pulses_for(1), 0);
    for e in &sched.events {
        assert!((e.t_off - e.t_on - 1.0 / 300.0).abs() <= 1e-6);
        assert!(((e.t_off - e.t_on) / params.period() - params.duty_cycle).abs() <= 1e-9 * params.duty_cycle);
    }
    assert!(sched.events.iter().all(|e| e.active_dots & ElectrodeFrame::SIDE_MASK == 0));
}

#[test]
fn side_dots_burst_with_strength() {
    let params = StimulationParams::default();
    let up = compose_frame(BrailleCell::EMPTY, &cmd(CommandKind::Up, 1.0));
    let sched = schedule_stimulation(up, &params, 1.0, 1.0).unwrap();
    let on: Vec<usize> = sched.events.iter().map(|e| (e.t_on * 30.0).round() as usize).collect();
    assert_eq!(on.len(), 24);
    assert!(on.iter().all(|i| i % 5 != 4));
    let weak = schedule_stimulation(up, &params, 1.0, 0.2).unwrap();
    assert_eq!(weak.events.len(), 15);
    assert_eq!(burst_length(0.36), 2);
    assert_eq!(burst_length(0.76), 4);
    let none = compose_frame(BrailleCell::EMPTY, &cmd(CommandKind::None, 0.0));
    assert!(schedule_stimulation(none, &params, 1.0, 0.0).unwrap().events.is_empty());
    assert!(schedule_stimulation(up, &params, 0.0, 1.0).is_err());
    assert!(schedule_stimulation(up, &StimulationParams { duty_cycle: 1.0, ..params }, 1.0, 1.0).is_err());
}

proptest! {
    #[test]
    fn duty_cycle_holds_everywhere(
        freq in 1.0f64..200.0,
        duty in 0.01f64..0.95,
        duration in 0.05f64..3.0,
        strength in 0.0f64..1.0,
        bits in any::<u16>(),
    ) {
        let params = StimulationParams { frequency_hz: freq, duty_cycle: duty, ..Default::default() };
        let sched = schedule_stimulation(ElectrodeFrame { dots16: bits }, &params, duration, strength).unwrap();
        let mut last_off = f64::NEG_INFINITY;
        for e in &sched.events {
            prop_assert!(((e.t_off - e.t_on) / params.period() - duty).abs() <= 1e-9 * duty);
            prop_assert!(e.t_on >= last_off);
            prop_assert!(e.t_off <= duration + 1e-9);
            last_off = e.t_off;
        }
    }

    #[test]
    fn regulation_is_monotone_in_the_deficit(v in 60.0f64..100.0, m1 in 0.0f64..80.0, m2 in 0.0f64..80.0) {
        let p = StimulationParams { voltage_v: v, ..Default::default() };
        let (lo, hi) = if m1 < m2 { (m1, m2) } else { (m2, m1) };
        prop_assert!(regulate_current(lo, &p).voltage_v >= regulate_current(hi, &p).voltage_v);
        let out = regulate_current(m1, &p).voltage_v;
        prop_assert!((60.0..=100.0).contains(&out));
    }
}

#[test]
fn regulation_examples() {
    let p = StimulationParams { voltage_v: 80.0, ..Default::default() };
    assert_eq!(regulate_current(30.0, &p).voltage_v, 80.0);
    let p = StimulationParams { voltage_v: 98.0, ..Default::default() };
    assert_eq!(regulate_current(20.0, &p).voltage_v, 100.0);
    let p = StimulationParams { voltage_v: 60.0, ..Default::default() };
    assert_eq!(regulate_current(90.0, &p).voltage_v, 60.0);
}

#[test]
fn regulation_converges_on_an_ohmic_load() {
    let load_mohm = 3.0;
    let mut p = StimulationParams { voltage_v: 60.0, ..Default::default() };
    let mut steps = 0;
    while (p.voltage_v / load_mohm - 30.0).abs() > 1.0 {
        p = regulate_current(p.voltage_v / load_mohm, &p);
        steps += 1;
        assert!(steps <= 20, "not converged after 20 steps");
    }
    println!("ohmic load converged in {steps} steps at {:.3} V", p.voltage_v);
}

/// Steps until the Ohmic load current is within 1 uA of target, starting at
/// `start_v`; `None` when 20 steps are not enough.
fn steps_to_converge(load_mohm: f64, start_v: f64) -> Option<usize> {
    let mut p = StimulationParams { voltage_v: start_v, ..Default::default() };
    for steps in 0..=20 {
        if (p.voltage_v / load_mohm - p.target_current_ua).abs() <= 1.0 {
            return Some(steps);
        }
        p = regulate_current(p.voltage_v / load_mohm, &p);
    }
    None
}

#[test]
fn regulation_converges_across_the_load_range() {
    for i in 0..=26 {
        let load = 2.0 + 0.05 * i as f64;
        for start in [60.0, 80.0, 100.0] {
            assert!(steps_to_converge(load, start).is_some(), "{load} MOhm from {start} V");
        }
    }
}

#[test]
fn training_alternates_with_half_second_gaps() {
    assert!(training_sequence(0, &StimulationParams::default()).unwrap().events.is_empty());
    let slots = training_slots(2);
    let kinds: Vec<_> = slots.iter().map(|s| s.1).collect();
    assert_eq!(kinds, vec![CommandKind::Up, CommandKind::Down, CommandKind::Up, CommandKind::Down]);
    for w in slots.windows(2) {
        assert!((w[1].0 - w[0].0 - 1.0).abs() < 1e-12);
    }
    let sched = training_sequence(3, &StimulationParams::default()).unwrap();
    let mut last_slot_bits = None;
    for (i, (start, _)) in training_slots(3).iter().enumerate() {
        let evs: Vec<_> = sched.events.iter().filter(|e| e.t_on >= *start - 1e-9 && e.t_on < start + 1.0 - 1e-9).collect();
        assert!(!evs.is_empty());
        assert!(evs.iter().all(|e| e.t_off <= start + TRAINING_CUE_S + 1e-9), "slot {i} cue leaks into the gap");
        let bits = evs[0].active_dots;
        assert!(evs.iter().all(|e| e.active_dots == bits));
        assert_ne!(Some(bits), last_slot_bits);
        last_slot_bits = Some(bits);
    }
}

#[test]
fn waveform_csv_export() {
    let params = StimulationParams::default();
    let frame = compose_frame(encode_char('b', Dialect::Six).unwrap(), &cmd(CommandKind::None, 0.0));
    let csv = schedule_stimulation(frame, &params, 0.1, 0.0).unwrap().to_csv();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("t,dotIndex,state"));
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 3 * 2 * 2);
    assert_eq!(rows[0], "0.000000,0,1");
    assert_eq!(rows[1], "0.000000,1,1");
    assert_eq!(rows[2], "0.003333,0,0");
}
