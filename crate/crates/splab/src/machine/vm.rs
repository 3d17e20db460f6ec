//! A tiny monotone machine: programs are strings of 3-bit opcodes working on
//! an unbounded bit tape, emitting output bits that are never retracted.
//!
//! Opcodes (octal digit, mnemonic):
//!   0 `<` move left        4 `[` if cell 0, jump past the matching `]`
//!   1 `>` move right       5 `]` jump back to the matching `[`
//!   2 `^` flip cell        6 `h` halt
//!   3 `o` output cell bit  7 `n` no-op
//!
//! Execution charges one step per executed opcode. A program with
//! unbalanced brackets is invalid and produces nothing. Running off the end
//! of the opcode string leaves the machine in `Running` (it never halted);
//! exceeding the step budget yields `BudgetExhausted`. Only an executed `h`
//! halts.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[repr(u8)]
pub enum Opcode {
    Left = 0,
    Right = 1,
    Flip = 2,
    Output = 3,
    Open = 4,
    Close = 5,
    Halt = 6,
    Nop = 7,
}

pub const OPCODE_COUNT: u8 = 8;
/// Bits per opcode; program length in bits is 3 times the opcode count.
pub const BITS_PER_OPCODE: u32 = 3;

impl Opcode {
    pub fn from_digit(d: u8) -> Option<Opcode> {
        use Opcode::*;
        Some(match d {
            0 => Left,
            1 => Right,
            2 => Flip,
            3 => Output,
            4 => Open,
            5 => Close,
            6 => Halt,
            7 => Nop,
            _ => return None,
        })
    }

    pub fn digit(self) -> u8 {
        self as u8
    }

    pub fn mnemonic(self) -> char {
        use Opcode::*;
        match self {
            Left => '<',
            Right => '>',
            Flip => '^',
            Output => 'o',
            Open => '[',
            Close => ']',
            Halt => 'h',
            Nop => 'n',
        }
    }

    pub fn from_mnemonic(c: char) -> Option<Opcode> {
        use Opcode::*;
        Some(match c {
            '<' => Left,
            '>' => Right,
            '^' => Flip,
            'o' => Output,
            '[' => Open,
            ']' => Close,
            'h' => Halt,
            'n' => Nop,
            _ => return None,
        })
    }
}

/// A nonempty opcode string.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Program {
    ops: Vec<Opcode>,
}

impl Program {
    pub fn new(ops: Vec<Opcode>) -> Result<Program> {
        if ops.is_empty() {
            return Err(Error::Domain("a program needs at least one opcode".into()));
        }
        Ok(Program { ops })
    }

    /// Parse either mnemonics (`^ [ o ]`, whitespace optional) or octal
    /// digits (`2 4 3 5`); the two character sets are disjoint, and a mix is
    /// rejected.
    pub fn parse(s: &str) -> Result<Program> {
        let chars: Vec<char> = s.chars().filter(|c| !c.is_whitespace()).collect();
        if chars.is_empty() {
            return Err(Error::parse("empty program"));
        }
        let as_digits: Option<Vec<Opcode>> = chars
            .iter()
            .map(|c| c.to_digit(8).and_then(|d| Opcode::from_digit(d as u8)))
            .collect();
        if let Some(ops) = as_digits {
            return Program::new(ops);
        }
        let as_mnemonics: Option<Vec<Opcode>> =
            chars.iter().map(|&c| Opcode::from_mnemonic(c)).collect();
        match as_mnemonics {
            Some(ops) => Program::new(ops),
            None => Err(Error::parse(format!(
                "program must be octal digits or mnemonics <>^o[]hn, got {s:?}"
            ))),
        }
    }

    pub fn ops(&self) -> &[Opcode] {
        &self.ops
    }

    pub fn opcode_count(&self) -> usize {
        self.ops.len()
    }

    pub fn bit_len(&self) -> u32 {
        BITS_PER_OPCODE * self.ops.len() as u32
    }

    pub fn octal_string(&self) -> String {
        self.ops
            .iter()
            .map(|o| char::from(b'0' + o.digit()))
            .collect()
    }

    pub fn mnemonic_string(&self) -> String {
        self.ops.iter().map(|o| o.mnemonic()).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub enum RunStatus {
    /// Executed `h`.
    Halted,
    /// Ran past the last opcode without halting.
    Running,
    /// Step budget hit first.
    BudgetExhausted,
    /// Unbalanced brackets; never executed.
    Invalid,
}

/// Final machine configuration after a budgeted run.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MachineState {
    /// Emitted bits, truncated at the configured maximum output length.
    pub output: Vec<u8>,
    /// Total bits emitted, including any truncated past the maximum.
    pub emitted: u64,
    pub steps: u64,
    pub status: RunStatus,
}

/// Bracket partner table: `table[i]` is the index of the partner of the
/// bracket at `i` (arbitrary for non-brackets). `None` when unbalanced.
pub fn bracket_match(ops: &[Opcode]) -> Option<Vec<u32>> {
    let mut table = vec![0u32; ops.len()];
    let mut stack: Vec<u32> = Vec::new();
    for (i, op) in ops.iter().enumerate() {
        match op {
            Opcode::Open => stack.push(i as u32),
            Opcode::Close => {
                let open = stack.pop()?;
                table[open as usize] = i as u32;
                table[i] = open;
            }
            _ => {}
        }
    }
    stack.is_empty().then_some(table)
}

/// Reusable work tape; positions are split into the nonnegative and negative
/// half-lines, both growing on demand and reset in O(1) between runs.
#[derive(Debug, Default)]
pub struct VmScratch {
    right: Vec<u8>,
    left: Vec<u8>,
}

impl VmScratch {
    pub fn new() -> VmScratch {
        VmScratch::default()
    }

    fn reset(&mut self) {
        self.right.clear();
        self.left.clear();
    }

    fn cell(&mut self, pos: i64) -> &mut u8 {
        if pos >= 0 {
            let i = pos as usize;
            if self.right.len() <= i {
                self.right.resize(i + 1, 0);
            }
            &mut self.right[i]
        } else {
            let i = (-(pos + 1)) as usize;
            if self.left.len() <= i {
                self.left.resize(i + 1, 0);
            }
            &mut self.left[i]
        }
    }
}

/// Run an opcode slice with a step budget, reusing `scratch` for the tape.
pub fn run_opcodes(
    ops: &[Opcode],
    t_max: u64,
    max_output: usize,
    scratch: &mut VmScratch,
) -> MachineState {
    let Some(matching) = bracket_match(ops) else {
        return MachineState {
            output: Vec::new(),
            emitted: 0,
            steps: 0,
            status: RunStatus::Invalid,
        };
    };
    scratch.reset();
    let mut output = Vec::new();
    let mut emitted = 0u64;
    let mut steps = 0u64;
    let mut pos = 0i64;
    let mut pc = 0usize;
    let status = loop {
        if pc >= ops.len() {
            break RunStatus::Running;
        }
        if steps >= t_max {
            break RunStatus::BudgetExhausted;
        }
        steps += 1;
        match ops[pc] {
            Opcode::Left => {
                pos -= 1;
                pc += 1;
            }
            Opcode::Right => {
                pos += 1;
                pc += 1;
            }
            Opcode::Flip => {
                *scratch.cell(pos) ^= 1;
                pc += 1;
            }
            Opcode::Output => {
                let bit = *scratch.cell(pos);
                emitted += 1;
                if output.len() < max_output {
                    output.push(bit);
                }
                pc += 1;
            }
            Opcode::Open => {
                if *scratch.cell(pos) == 0 {
                    pc = matching[pc] as usize + 1;
                } else {
                    pc += 1;
                }
            }
            Opcode::Close => {
                pc = matching[pc] as usize;
            }
            Opcode::Halt => break RunStatus::Halted,
            Opcode::Nop => pc += 1,
        }
    };
    MachineState {
        output,
        emitted,
        steps,
        status,
    }
}

/// Convenience wrapper allocating a fresh tape.
pub fn run_program(p: &Program, t_max: u64, max_output: usize) -> MachineState {
    let mut scratch = VmScratch::new();
    run_opcodes(p.ops(), t_max, max_output, &mut scratch)
}
