use super::{Chan, CombPath, Component, Ctx, Io, PortSpec, Side, SpillReg};
use crate::protocol::{Command, DataBeat, ResponseBeat};

/// Pipeline stage on a link. Each of the five channels is either a spill
/// register or a plain wire, chosen by `flags` in the order aw, w, b, ar, r.
#[derive(Debug, Clone)]
pub struct Cut {
    spec: PortSpec,
    flags: [bool; 5],
    aw: SpillReg<Command>,
    w: SpillReg<DataBeat>,
    b: SpillReg<ResponseBeat>,
    ar: SpillReg<Command>,
    r: SpillReg<ResponseBeat>,
}

impl Cut {
    pub fn new(spec: PortSpec, flags: [bool; 5]) -> Self {
        Self {
            spec,
            flags,
            aw: SpillReg::new(),
            w: SpillReg::new(),
            b: SpillReg::new(),
            ar: SpillReg::new(),
            r: SpillReg::new(),
        }
    }

    /// All five channels registered.
    pub fn full(spec: PortSpec) -> Self {
        Self::new(spec, [true; 5])
    }

    pub fn flags(&self) -> [bool; 5] {
        self.flags
    }

    /// Registered stages a request plus its response cross.
    pub fn stages(&self) -> usize {
        self.flags.iter().filter(|&&f| f).count()
    }
}

macro_rules! forward {
    ($self:ident, $io:ident, $reg:ident, $flag:expr, $input:ident, $drive:ident, $out_ready:ident, $set_ready:ident) => {
        if $flag {
            $io.$drive(0, $self.$reg.out().cloned());
            $io.$set_ready(0, $self.$reg.ready());
        } else {
            let v = $io.$input(0).cloned();
            $io.$drive(0, v);
            let r = $io.$out_ready(0);
            $io.$set_ready(0, r);
        }
    };
}

impl Component for Cut {
    fn kind(&self) -> &'static str {
        "cut"
    }

    fn slave_ports(&self) -> Vec<PortSpec> {
        vec![self.spec]
    }

    fn master_ports(&self) -> Vec<PortSpec> {
        vec![self.spec]
    }

    fn comb_paths(&self) -> Vec<CombPath> {
        let mut v = Vec::new();
        for (i, c) in Chan::ALL.iter().enumerate() {
            if self.flags[i] {
                continue;
            }
            let (from, to) = if c.is_request() {
                ((Side::Slave, 0), (Side::Master, 0))
            } else {
                ((Side::Master, 0), (Side::Slave, 0))
            };
            v.extend(CombPath::through(*c, from, to));
        }
        v
    }

    fn eval(&mut self, io: &mut Io<'_>) {
        forward!(self, io, aw, self.flags[0], s_aw, m_drive_aw, m_aw_ready, s_set_aw_ready);
        forward!(self, io, w, self.flags[1], s_w, m_drive_w, m_w_ready, s_set_w_ready);
        forward!(self, io, b, self.flags[2], m_b, s_drive_b, s_b_ready, m_set_b_ready);
        forward!(self, io, ar, self.flags[3], s_ar, m_drive_ar, m_ar_ready, s_set_ar_ready);
        forward!(self, io, r, self.flags[4], m_r, s_drive_r, s_r_ready, m_set_r_ready);
    }

    fn commit(&mut self, io: &Io<'_>, _ctx: &mut Ctx<'_>) {
        if self.flags[0] {
            self.aw.commit(io.s_aw_fire(0).cloned(), io.m_aw_fire(0).is_some());
        }
        if self.flags[1] {
            self.w.commit(io.s_w_fire(0).cloned(), io.m_w_fire(0).is_some());
        }
        if self.flags[2] {
            self.b.commit(io.m_b_fire(0).cloned(), io.s_b_fire(0).is_some());
        }
        if self.flags[3] {
            self.ar.commit(io.s_ar_fire(0).cloned(), io.m_ar_fire(0).is_some());
        }
        if self.flags[4] {
            self.r.commit(io.m_r_fire(0).cloned(), io.s_r_fire(0).is_some());
        }
    }

    fn busy(&self) -> bool {
        !(self.aw.is_empty() && self.w.is_empty() && self.b.is_empty() && self.ar.is_empty() && self.r.is_empty())
    }

    fn describe(&self) -> String {
        format!(
            "aw {} w {} b {} ar {} r {}",
            self.aw.len(),
            self.w.len(),
            self.b.len(),
            self.ar.len(),
            self.r.len()
        )
    }
}
