//! Definition documents shipped inside the binary.

pub struct Demo {
    pub name: &'static str,
    pub summary: &'static str,
    pub text: &'static str,
}

pub const DEMOS: &[Demo] = &[
    Demo {
        name: "minimal",
        summary: "one log state",
        text: include_str!("../demos/minimal.json"),
    },
    Demo {
        name: "fig1",
        summary: "robot mission: EMO_2_NODE driving MERLIN2_EXECUTOR with NAVIGATION and CHECK_WP",
        text: include_str!("../demos/fig1.json"),
    },
    Demo {
        name: "long-wait",
        summary: "a 60 s wait polling every 100 ms, for trying cancellation",
        text: include_str!("../demos/long-wait.json"),
    },
    Demo {
        name: "remote-call",
        summary: "request/reply over the loopback transport",
        text: include_str!("../demos/remote-call.json"),
    },
    Demo {
        name: "nested-sharing",
        summary: "a value written two levels down and read at the top",
        text: include_str!("../demos/nested-sharing.json"),
    },
];

pub fn find(name: &str) -> Option<&'static Demo> {
    DEMOS.iter().find(|d| d.name == name)
}
