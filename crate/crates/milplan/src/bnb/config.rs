//! The solver configuration space: 15 categorical parameters, each with 2-4
//! options, covering branching, node selection, primal heuristics, presolve,
//! LP pricing, and a handful of search-management toggles.
//!
//! The one-hot layout (dimension 35) is fixed and documented here because the
//! configuration selector learns over it: parameters appear in declaration
//! order, each contributing one slot per option, with exactly one slot set
//! per parameter.

use rand::Rng;
use serde::{Deserialize, Serialize};

macro_rules! config_param {
    ($name:ident { $($variant:ident => $label:literal),+ $(,)? }) => {
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
        #[serde(rename_all = "snake_case")]
        pub enum $name { $($variant),+ }

        impl $name {
            pub const OPTIONS: &'static [$name] = &[$($name::$variant),+];

            pub fn label(self) -> &'static str {
                match self { $($name::$variant => $label),+ }
            }

            pub fn index(self) -> usize {
                Self::OPTIONS.iter().position(|&o| o == self).unwrap()
            }
        }
    };
}

config_param!(BranchRule {
    MostFractional => "most_fractional",
    Pseudocost => "pseudocost",
    Random => "random",
});

config_param!(BranchDirection {
    DownFirst => "down_first",
    UpFirst => "up_first",
    Auto => "auto",
});

config_param!(NodeSelection {
    BestBound => "best_bound",
    DepthFirst => "depth_first",
    Hybrid => "hybrid",
});

config_param!(PlungeDepth {
    Four => "4",
    Sixteen => "16",
});

config_param!(RoundingFreq {
    Off => "off",
    EveryTenNodes => "every_10_nodes",
    EveryNode => "every_node",
});

config_param!(DivingMode {
    Off => "off",
    RootOnly => "root_only",
    Periodic => "periodic",
});

config_param!(DivingBudget {
    Ten => "10",
    Fifty => "50",
});

config_param!(PresolveMode {
    Off => "off",
    Basic => "basic",
});

config_param!(LpPricing {
    Dantzig => "dantzig",
    Bland => "bland",
});

config_param!(WarmStart {
    Off => "off",
    On => "on",
});

config_param!(TieBreak {
    Index => "index",
    ReverseIndex => "reverse_index",
});

config_param!(PriorityDecay {
    Off => "off",
    On => "on",
});

config_param!(IncumbentCut {
    Off => "off",
    On => "on",
});

config_param!(NodeReprocess {
    Off => "off",
    On => "on",
});

config_param!(RandomSeed {
    Zero => "0",
    One => "1",
});

impl PlungeDepth {
    pub fn depth(self) -> u32 {
        match self {
            PlungeDepth::Four => 4,
            PlungeDepth::Sixteen => 16,
        }
    }
}

impl DivingBudget {
    pub fn budget(self) -> usize {
        match self {
            DivingBudget::Ten => 10,
            DivingBudget::Fifty => 50,
        }
    }
}

impl RandomSeed {
    pub fn seed(self) -> u64 {
        match self {
            RandomSeed::Zero => 0,
            RandomSeed::One => 1,
        }
    }
}

/// Complete solver configuration. Every field is categorical; the default is
/// the solver's tuned middle-of-the-road setting.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub branch_rule: BranchRule,
    pub branch_direction: BranchDirection,
    pub node_selection: NodeSelection,
    pub plunge_depth: PlungeDepth,
    pub rounding_freq: RoundingFreq,
    pub diving_mode: DivingMode,
    pub diving_budget: DivingBudget,
    pub presolve: PresolveMode,
    pub lp_pricing: LpPricing,
    pub warm_start: WarmStart,
    pub tie_break: TieBreak,
    pub priority_decay: PriorityDecay,
    pub incumbent_cut: IncumbentCut,
    pub node_reprocess: NodeReprocess,
    pub rng_seed: RandomSeed,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            branch_rule: BranchRule::MostFractional,
            branch_direction: BranchDirection::DownFirst,
            node_selection: NodeSelection::BestBound,
            plunge_depth: PlungeDepth::Four,
            rounding_freq: RoundingFreq::EveryTenNodes,
            diving_mode: DivingMode::RootOnly,
            diving_budget: DivingBudget::Ten,
            presolve: PresolveMode::Basic,
            lp_pricing: LpPricing::Dantzig,
            warm_start: WarmStart::On,
            tie_break: TieBreak::Index,
            priority_decay: PriorityDecay::Off,
            incumbent_cut: IncumbentCut::On,
            node_reprocess: NodeReprocess::Off,
            rng_seed: RandomSeed::Zero,
        }
    }
}

/// Option counts per parameter, in declaration order.
pub const PARAM_CARDINALITIES: [usize; 15] = [3, 3, 3, 2, 3, 3, 2, 2, 2, 2, 2, 2, 2, 2, 2];

/// Total one-hot dimension (35).
pub const ONE_HOT_DIM: usize = {
    let mut total = 0;
    let mut i = 0;
    while i < PARAM_CARDINALITIES.len() {
        total += PARAM_CARDINALITIES[i];
        i += 1;
    }
    total
};

impl SolverConfig {
    pub const NUM_PARAMS: usize = 15;

    /// Selected option index of each parameter, in declaration order.
    pub fn option_indices(&self) -> [usize; 15] {
        [
            self.branch_rule.index(),
            self.branch_direction.index(),
            self.node_selection.index(),
            self.plunge_depth.index(),
            self.rounding_freq.index(),
            self.diving_mode.index(),
            self.diving_budget.index(),
            self.presolve.index(),
            self.lp_pricing.index(),
            self.warm_start.index(),
            self.tie_break.index(),
            self.priority_decay.index(),
            self.incumbent_cut.index(),
            self.node_reprocess.index(),
            self.rng_seed.index(),
        ]
    }

    /// `(parameter name, selected option label)` pairs in declaration order.
    pub fn describe(&self) -> [(&'static str, &'static str); 15] {
        [
            ("branch_rule", self.branch_rule.label()),
            ("branch_direction", self.branch_direction.label()),
            ("node_selection", self.node_selection.label()),
            ("plunge_depth", self.plunge_depth.label()),
            ("rounding_freq", self.rounding_freq.label()),
            ("diving_mode", self.diving_mode.label()),
            ("diving_budget", self.diving_budget.label()),
            ("presolve", self.presolve.label()),
            ("lp_pricing", self.lp_pricing.label()),
            ("warm_start", self.warm_start.label()),
            ("tie_break", self.tie_break.label()),
            ("priority_decay", self.priority_decay.label()),
            ("incumbent_cut", self.incumbent_cut.label()),
            ("node_reprocess", self.node_reprocess.label()),
            ("rng_seed", self.rng_seed.label()),
        ]
    }

    /// Fixed one-hot encoding, dimension [`ONE_HOT_DIM`]: parameters in
    /// declaration order, one slot per option, exactly one slot set per
    /// parameter.
    pub fn one_hot(&self) -> Vec<f64> {
        let mut v = vec![0.0; ONE_HOT_DIM];
        let mut offset = 0;
        for (param, &card) in self
            .option_indices()
            .iter()
            .zip(PARAM_CARDINALITIES.iter())
        {
            v[offset + param] = 1.0;
            offset += card;
        }
        v
    }

    /// Inverse of [`option_indices`](Self::option_indices): rebuild a config
    /// from per-parameter option indices. Fails if any index is out of range
    /// for its parameter.
    pub fn from_option_indices(indices: &[usize; 15]) -> Result<Self, String> {
        fn pick<T: Copy>(opts: &[T], i: usize, name: &str) -> Result<T, String> {
            opts.get(i)
                .copied()
                .ok_or_else(|| format!("option index {i} out of range for {name}"))
        }
        Ok(Self {
            branch_rule: pick(BranchRule::OPTIONS, indices[0], "branch_rule")?,
            branch_direction: pick(BranchDirection::OPTIONS, indices[1], "branch_direction")?,
            node_selection: pick(NodeSelection::OPTIONS, indices[2], "node_selection")?,
            plunge_depth: pick(PlungeDepth::OPTIONS, indices[3], "plunge_depth")?,
            rounding_freq: pick(RoundingFreq::OPTIONS, indices[4], "rounding_freq")?,
            diving_mode: pick(DivingMode::OPTIONS, indices[5], "diving_mode")?,
            diving_budget: pick(DivingBudget::OPTIONS, indices[6], "diving_budget")?,
            presolve: pick(PresolveMode::OPTIONS, indices[7], "presolve")?,
            lp_pricing: pick(LpPricing::OPTIONS, indices[8], "lp_pricing")?,
            warm_start: pick(WarmStart::OPTIONS, indices[9], "warm_start")?,
            tie_break: pick(TieBreak::OPTIONS, indices[10], "tie_break")?,
            priority_decay: pick(PriorityDecay::OPTIONS, indices[11], "priority_decay")?,
            incumbent_cut: pick(IncumbentCut::OPTIONS, indices[12], "incumbent_cut")?,
            node_reprocess: pick(NodeReprocess::OPTIONS, indices[13], "node_reprocess")?,
            rng_seed: pick(RandomSeed::OPTIONS, indices[14], "rng_seed")?,
        })
    }

    /// Uniform sample over the whole space.
    pub fn sample(rng: &mut impl Rng) -> Self {
        fn pick<T: Copy>(rng: &mut impl Rng, opts: &[T]) -> T {
            opts[rng.random_range(0..opts.len())]
        }
        Self {
            branch_rule: pick(rng, BranchRule::OPTIONS),
            branch_direction: pick(rng, BranchDirection::OPTIONS),
            node_selection: pick(rng, NodeSelection::OPTIONS),
            plunge_depth: pick(rng, PlungeDepth::OPTIONS),
            rounding_freq: pick(rng, RoundingFreq::OPTIONS),
            diving_mode: pick(rng, DivingMode::OPTIONS),
            diving_budget: pick(rng, DivingBudget::OPTIONS),
            presolve: pick(rng, PresolveMode::OPTIONS),
            lp_pricing: pick(rng, LpPricing::OPTIONS),
            warm_start: pick(rng, WarmStart::OPTIONS),
            tie_break: pick(rng, TieBreak::OPTIONS),
            priority_decay: pick(rng, PriorityDecay::OPTIONS),
            incumbent_cut: pick(rng, IncumbentCut::OPTIONS),
            node_reprocess: pick(rng, NodeReprocess::OPTIONS),
            rng_seed: pick(rng, RandomSeed::OPTIONS),
        }
    }

    /// Mutate exactly one parameter to a different option (the local
    /// improvement step of configuration collection). Every parameter has at
    /// least two options, so the result always differs from `self`.
    pub fn mutate_one(&self, rng: &mut impl Rng) -> Self {
        fn step<T: Copy + PartialEq>(current: T, opts: &[T], rng: &mut impl Rng) -> T {
            let i = opts.iter().position(|o| *o == current).unwrap();
            let s = rng.random_range(1..opts.len());
            opts[(i + s) % opts.len()]
        }
        let mut out = *self;
        match rng.random_range(0..Self::NUM_PARAMS) {
            0 => out.branch_rule = step(out.branch_rule, BranchRule::OPTIONS, rng),
            1 => out.branch_direction = step(out.branch_direction, BranchDirection::OPTIONS, rng),
            2 => out.node_selection = step(out.node_selection, NodeSelection::OPTIONS, rng),
            3 => out.plunge_depth = step(out.plunge_depth, PlungeDepth::OPTIONS, rng),
            4 => out.rounding_freq = step(out.rounding_freq, RoundingFreq::OPTIONS, rng),
            5 => out.diving_mode = step(out.diving_mode, DivingMode::OPTIONS, rng),
            6 => out.diving_budget = step(out.diving_budget, DivingBudget::OPTIONS, rng),
            7 => out.presolve = step(out.presolve, PresolveMode::OPTIONS, rng),
            8 => out.lp_pricing = step(out.lp_pricing, LpPricing::OPTIONS, rng),
            9 => out.warm_start = step(out.warm_start, WarmStart::OPTIONS, rng),
            10 => out.tie_break = step(out.tie_break, TieBreak::OPTIONS, rng),
            11 => out.priority_decay = step(out.priority_decay, PriorityDecay::OPTIONS, rng),
            12 => out.incumbent_cut = step(out.incumbent_cut, IncumbentCut::OPTIONS, rng),
            13 => out.node_reprocess = step(out.node_reprocess, NodeReprocess::OPTIONS, rng),
            _ => out.rng_seed = step(out.rng_seed, RandomSeed::OPTIONS, rng),
        }
        out
    }
}
