//! Deterministic JSON reports. Numbers are written with six significant
//! digits so outputs diff cleanly between runs.

/// Six significant digits, fixed notation for moderate magnitudes and
/// exponent notation otherwise.
pub fn sig6(x: f64) -> String {
    if !x.is_finite() {
        return "null".into();
    }
    if x == 0.0 {
        return "0.00000".into();
    }
    // The exponent of the rounded scientific form already accounts for carries.
    let sci = format!("{x:.5e}");
    let exp: i32 = sci[sci.find('e').expect("exponent") + 1..].parse().expect("integer exponent");
    if (-4..6).contains(&exp) {
        let decimals = (5 - exp) as usize;
        format!("{x:.decimals$}")
    } else {
        sci
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Num(f64),
    Int(i64),
    Str(String),
    Bool(bool),
}

impl Value {
    fn render(&self) -> String {
        match self {
            Value::Num(x) => sig6(*x),
            Value::Int(i) => i.to_string(),
            Value::Str(s) => serde_json::to_string(s).expect("string serializes"),
            Value::Bool(b) => b.to_string(),
        }
    }
}

impl From<f64> for Value {
    fn from(x: f64) -> Value {
        Value::Num(x)
    }
}

impl From<usize> for Value {
    fn from(x: usize) -> Value {
        Value::Int(x as i64)
    }
}

impl From<u64> for Value {
    fn from(x: u64) -> Value {
        Value::Int(x as i64)
    }
}

impl From<&str> for Value {
    fn from(s: &str) -> Value {
        Value::Str(s.to_string())
    }
}

impl From<String> for Value {
    fn from(s: String) -> Value {
        Value::Str(s)
    }
}

impl From<bool> for Value {
    fn from(b: bool) -> Value {
        Value::Bool(b)
    }
}

/// `{"metric", "value", "params", "n"}` with params in insertion order.
#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub metric: String,
    pub value: f64,
    pub params: Vec<(String, Value)>,
    pub n: usize,
}

impl Report {
    pub fn new(metric: &str, value: f64, n: usize) -> Report {
        Report {
            metric: metric.into(),
            value,
            params: Vec::new(),
            n,
        }
    }

    pub fn param(mut self, key: &str, v: impl Into<Value>) -> Report {
        self.params.push((key.into(), v.into()));
        self
    }

    pub fn to_json(&self) -> String {
        let params: Vec<String> = self
            .params
            .iter()
            .map(|(k, v)| format!("{}: {}", Value::Str(k.clone()).render(), v.render()))
            .collect();
        format!(
            "{{\"metric\": {}, \"value\": {}, \"params\": {{{}}}, \"n\": {}}}",
            Value::Str(self.metric.clone()).render(),
            sig6(self.value),
            params.join(", "),
            self.n
        )
    }
}
