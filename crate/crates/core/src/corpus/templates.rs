//! Problem templates for the synthetic corpus.
//!
//! Each template renders a student's solution from their style choices and
//! an optional injected bug. Bug sites are fixed per template; a bug that
//! has no site in the chosen rendering leaves the code unchanged.

use super::render::{block, if_chain, if_else, line, Stmt};
use super::{BugKind, LoopStyle, NestingStyle, SkillTag};

#[derive(Debug, Clone, Copy)]
pub struct Ctx {
    pub nesting: NestingStyle,
    pub loops: LoopStyle,
    pub bug: Option<BugKind>,
    /// Shifts template constants so repeated templates differ.
    pub variant: i64,
}

impl Ctx {
    fn bug(&self, b: BugKind) -> bool {
        self.bug == Some(b)
    }

    fn nested(&self) -> bool {
        self.nesting == NestingStyle::Nested
    }

    /// Comparison at the primary bug site.
    fn cmp<'a>(&self, normal: &'a str, off_by_one: &'a str, wrong: &'a str) -> &'a str {
        if self.bug(BugKind::OffByOne) {
            off_by_one
        } else if self.bug(BugKind::WrongComparison) {
            wrong
        } else {
            normal
        }
    }

    /// Constant at the primary bug site.
    fn konst(&self, base: i64) -> i64 {
        let v = base + 5 * self.variant;
        if self.bug(BugKind::WrongConstant) {
            v + 1
        } else {
            v
        }
    }

    fn k(&self, base: i64) -> i64 {
        base + 5 * self.variant
    }

    fn else_branch(&self, body: Vec<Stmt>) -> Option<Vec<Stmt>> {
        (!self.bug(BugKind::MissingElse)).then_some(body)
    }

    /// Counting loop over `0..bound` in the student's loop style.
    fn count_loop(&self, var: &str, bound: &str, body: Vec<Stmt>) -> Vec<Stmt> {
        match self.loops {
            LoopStyle::For => vec![block(
                format!("for (int {var} = 0; {var} {} {bound}; {var}++)", self.cmp("<", "<=", "<=")),
                body,
            )],
            LoopStyle::While => {
                let mut b = body;
                b.push(line(format!("{var}++;")));
                vec![
                    line(format!("int {var} = 0;")),
                    block(format!("while ({var} {} {bound})", self.cmp("<", "<=", "<=")), b),
                ]
            }
        }
    }
}

pub struct Template {
    pub name: &'static str,
    pub skill: SkillTag,
    pub sentence: &'static str,
    pub ret: &'static str,
    pub params: &'static str,
    pub nesting_sensitive: bool,
    pub loop_sensitive: bool,
    pub body: fn(&Ctx) -> Vec<Stmt>,
}

fn ticket(c: &Ctx) -> Vec<Stmt> {
    let a = c.konst(60);
    let op = c.cmp("<=", "<", ">=");
    if c.nested() {
        vec![if_else(
            "isBirthday",
            vec![if_else(
                format!("speed {op} {}", a + 5),
                vec![line("return 0;")],
                c.else_branch(vec![line("return 1;")]),
            )],
            Some(vec![if_else(
                format!("speed <= {a}"),
                vec![line("return 0;")],
                Some(vec![line("return 1;")]),
            )]),
        )]
    } else {
        vec![
            if_else("isBirthday", vec![line("speed -= 5;")], None),
            if_else(
                format!("speed {op} {a}"),
                vec![line("return 0;")],
                c.else_branch(vec![line("return 1;")]),
            ),
        ]
    }
}

fn cigar_party(c: &Ctx) -> Vec<Stmt> {
    let (lo, hi) = (c.konst(40), c.k(60));
    let op = c.cmp(">=", ">", "<=");
    if c.nested() {
        vec![if_else(
            "isWeekend",
            vec![if_else(
                format!("cigars {op} {lo}"),
                vec![line("return true;")],
                c.else_branch(vec![line("return false;")]),
            )],
            Some(vec![line(format!(
                "return cigars >= {lo} && cigars <= {hi};"
            ))]),
        )]
    } else {
        vec![
            if_else(
                "isWeekend",
                vec![line(format!("return cigars {op} {lo};"))],
                None,
            ),
            line(format!("return cigars >= {lo} && cigars <= {hi};")),
        ]
    }
}

fn squirrel_play(c: &Ctx) -> Vec<Stmt> {
    let (lo, hi) = (c.konst(60), c.k(90));
    let op = c.cmp("<=", "<", ">=");
    if c.nested() {
        vec![if_else(
            format!("temp >= {lo}"),
            vec![if_else(
                "isSummer",
                vec![line(format!("return temp {op} {};", hi + 10))],
                c.else_branch(vec![line(format!("return temp <= {hi};"))]),
            )],
            Some(vec![line("return false;")]),
        )]
    } else {
        vec![
            if_else(
                "isSummer",
                vec![line(format!("return temp >= {lo} && temp {op} {};", hi + 10))],
                None,
            ),
            line(format!("return temp >= {lo} && temp <= {hi};")),
        ]
    }
}

fn date_fashion(c: &Ctx) -> Vec<Stmt> {
    let (lo, hi) = (c.k(2), c.konst(8));
    let op = c.cmp(">=", ">", "<=");
    if c.nested() {
        vec![if_else(
            format!("you > {lo} && date > {lo}"),
            vec![if_else(
                format!("you {op} {hi} || date >= {hi}"),
                vec![line("return 2;")],
                c.else_branch(vec![line("return 1;")]),
            )],
            Some(vec![line("return 0;")]),
        )]
    } else {
        vec![if_chain(
            vec![
                (format!("you <= {lo} || date <= {lo}"), vec![line("return 0;")]),
                (format!("you {op} {hi} || date >= {hi}"), vec![line("return 2;")]),
            ],
            c.else_branch(vec![line("return 1;")]),
        )]
    }
}

fn is_everywhere(c: &Ctx) -> Vec<Stmt> {
    let check = if c.nested() {
        if_else(
            "nums[i] != val",
            vec![if_else("nums[i + 1] != val", vec![line("return false;")], None)],
            None,
        )
    } else {
        if_else(
            "nums[i] != val && nums[i + 1] != val",
            vec![line("return false;")],
            None,
        )
    };
    let mut out = c.count_loop("i", "nums.length - 1", vec![check]);
    out.push(line("return true;"));
    out
}

fn count_evens(c: &Ctx) -> Vec<Stmt> {
    let m = if c.bug(BugKind::WrongConstant) { 3 } else { 2 };
    let eq = if c.bug(BugKind::WrongComparison) { "!=" } else { "==" };
    let mut out = vec![line("int count = 0;")];
    out.extend(c.count_loop(
        "i",
        "nums.length",
        vec![if_else(
            format!("nums[i] % {m} {eq} 0"),
            vec![line("count++;")],
            None,
        )],
    ));
    out.push(line("return count;"));
    out
}

fn count_hi(c: &Ctx) -> Vec<Stmt> {
    let check = if c.nested() {
        if_else(
            "str.charAt(i) == 'h'",
            vec![if_else("str.charAt(i + 1) == 'i'", vec![line("count++;")], None)],
            None,
        )
    } else {
        if_else(
            "str.charAt(i) == 'h' && str.charAt(i + 1) == 'i'",
            vec![line("count++;")],
            None,
        )
    };
    let mut out = vec![line("int count = 0;")];
    out.extend(c.count_loop("i", "str.length() - 1", vec![check]));
    out.push(line("return count;"));
    out
}

fn big_diff(c: &Ctx) -> Vec<Stmt> {
    let gt = if c.bug(BugKind::WrongComparison) { "<" } else { ">" };
    let mut body = vec![if_else(
        format!("nums[i] {gt} max"),
        vec![line("max = nums[i];")],
        None,
    )];
    body.push(if_else("nums[i] < min", vec![line("min = nums[i];")], None));
    let mut out = vec![line("int max = nums[0];"), line("int min = nums[0];")];
    out.extend(c.count_loop("i", "nums.length", body));
    out.push(line("return max - min;"));
    out
}

fn xy_balance(c: &Ctx) -> Vec<Stmt> {
    let check = if_chain(
        vec![
            ("str.charAt(i) == 'x'".to_string(), vec![line("return false;")]),
            ("str.charAt(i) == 'y'".to_string(), vec![line("return true;")]),
        ],
        None,
    );
    let ge = c.cmp(">=", ">", ">=");
    let mut out = match c.loops {
        LoopStyle::For => vec![block(
            format!("for (int i = str.length() - 1; i {ge} 0; i--)"),
            vec![check],
        )],
        LoopStyle::While => vec![
            line("int i = str.length() - 1;"),
            block(format!("while (i {ge} 0)"), vec![check, line("i--;")]),
        ],
    };
    out.push(line("return true;"));
    out
}

fn make_chocolate(c: &Ctx) -> Vec<Stmt> {
    let unit = c.konst(5);
    let le = c.cmp("<=", "<", ">=");
    vec![
        line(format!("int maxBig = goal / {unit};")),
        if_else(
            format!("maxBig {le} big"),
            vec![line(format!("goal -= maxBig * {unit};"))],
            c.else_branch(vec![line(format!("goal -= big * {unit};"))]),
        ),
        if_else("goal <= small", vec![line("return goal;")], None),
        line("return -1;"),
    ]
}

fn sum13(c: &Ctx) -> Vec<Stmt> {
    let k = c.konst(13);
    let mut out = vec![line("int sum = 0;")];
    out.extend(c.count_loop(
        "i",
        "nums.length",
        vec![if_else(
            format!("nums[i] == {k}"),
            vec![line("i++;")],
            c.else_branch(vec![line("sum += nums[i];")]),
        )],
    ));
    out.push(line("return sum;"));
    out
}

fn double_char(c: &Ctx) -> Vec<Stmt> {
    let mut out = vec![line("String result = \"\";")];
    out.extend(c.count_loop(
        "i",
        "str.length()",
        vec![line("result = result + str.charAt(i) + str.charAt(i);")],
    ));
    out.push(line("return result;"));
    out
}

pub const TEMPLATES: &[Template] = &[
    Template {
        name: "caughtSpeeding",
        skill: SkillTag::Conditional,
        sentence: "Return 0 for no ticket or 1 for a ticket, with 5 extra on your birthday.",
        ret: "int",
        params: "int speed, boolean isBirthday",
        nesting_sensitive: true,
        loop_sensitive: false,
        body: ticket,
    },
    Template {
        name: "cigarParty",
        skill: SkillTag::Conditional,
        sentence: "Return true if the party with the given cigars is successful.",
        ret: "boolean",
        params: "int cigars, boolean isWeekend",
        nesting_sensitive: true,
        loop_sensitive: false,
        body: cigar_party,
    },
    Template {
        name: "squirrelPlay",
        skill: SkillTag::Conditional,
        sentence: "Return true if the squirrels play at the given temperature.",
        ret: "boolean",
        params: "int temp, boolean isSummer",
        nesting_sensitive: true,
        loop_sensitive: false,
        body: squirrel_play,
    },
    Template {
        name: "dateFashion",
        skill: SkillTag::Conditional,
        sentence: "Return the chance of getting a table as 0, 1 or 2.",
        ret: "int",
        params: "int you, int date",
        nesting_sensitive: true,
        loop_sensitive: false,
        body: date_fashion,
    },
    Template {
        name: "isEverywhere",
        skill: SkillTag::Array,
        sentence: "Return true if every adjacent pair contains the value.",
        ret: "boolean",
        params: "int[] nums, int val",
        nesting_sensitive: true,
        loop_sensitive: true,
        body: is_everywhere,
    },
    Template {
        name: "countEvens",
        skill: SkillTag::Loop,
        sentence: "Return the number of even ints in the array.",
        ret: "int",
        params: "int[] nums",
        nesting_sensitive: false,
        loop_sensitive: true,
        body: count_evens,
    },
    Template {
        name: "countHi",
        skill: SkillTag::String,
        sentence: "Return the number of times hi appears in the string.",
        ret: "int",
        params: "String str",
        nesting_sensitive: true,
        loop_sensitive: true,
        body: count_hi,
    },
    Template {
        name: "bigDiff",
        skill: SkillTag::Array,
        sentence: "Return the difference between the largest and smallest values.",
        ret: "int",
        params: "int[] nums",
        nesting_sensitive: false,
        loop_sensitive: true,
        body: big_diff,
    },
    Template {
        name: "xyBalance",
        skill: SkillTag::String,
        sentence: "Return true if every x is followed later by a y.",
        ret: "boolean",
        params: "String str",
        nesting_sensitive: false,
        loop_sensitive: true,
        body: xy_balance,
    },
    Template {
        name: "makeChocolate",
        skill: SkillTag::Conditional,
        sentence: "Return the number of small bars to use, or -1.",
        ret: "int",
        params: "int small, int big, int goal",
        nesting_sensitive: false,
        loop_sensitive: false,
        body: make_chocolate,
    },
    Template {
        name: "sum13",
        skill: SkillTag::Loop,
        sentence: "Return the sum of the numbers, skipping 13 and the number after it.",
        ret: "int",
        params: "int[] nums",
        nesting_sensitive: false,
        loop_sensitive: true,
        body: sum13,
    },
    Template {
        name: "doubleChar",
        skill: SkillTag::String,
        sentence: "Return a string where each char is doubled.",
        ret: "String",
        params: "String str",
        nesting_sensitive: false,
        loop_sensitive: true,
        body: double_char,
    },
];
