//! Physical layout of a two-zone personal sound zone system.

use std::fmt;
use std::ops::{Add, Sub};
use std::str::FromStr;

use crate::error::PszError;
use crate::scalar::Real;

/// Point or direction in 3D space, meters.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Vec3<T> {
    pub x: T,
    pub y: T,
    pub z: T,
}

impl<T: Real> Vec3<T> {
    pub const fn new(x: T, y: T, z: T) -> Self {
        Self { x, y, z }
    }

    pub fn xy(x: T, y: T) -> Self {
        Self { x, y, z: T::zero() }
    }

    pub fn dot(self, o: Self) -> T {
        self.x * o.x + self.y * o.y + self.z * o.z
    }

    pub fn cross(self, o: Self) -> Self {
        Self { x: self.y * o.z - self.z * o.y, y: self.z * o.x - self.x * o.z, z: self.x * o.y - self.y * o.x }
    }

    pub fn norm(self) -> T {
        self.dot(self).sqrt()
    }

    pub fn scale(self, s: T) -> Self {
        Self { x: self.x * s, y: self.y * s, z: self.z * s }
    }

    pub fn distance(self, o: Self) -> T {
        (self - o).norm()
    }

    pub fn midpoint(self, o: Self) -> Self {
        (self + o).scale(T::lit(0.5))
    }
}

impl<T: Real> Add for Vec3<T> {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self { x: self.x + o.x, y: self.y + o.y, z: self.z + o.z }
    }
}

impl<T: Real> Sub for Vec3<T> {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        Self { x: self.x - o.x, y: self.y - o.y, z: self.z - o.z }
    }
}

/// Sound zone / listener label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Zone {
    A,
    B,
}

impl Zone {
    pub fn other(self) -> Self {
        match self {
            Zone::A => Zone::B,
            Zone::B => Zone::A,
        }
    }
}

impl fmt::Display for Zone {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Zone::A => "A",
            Zone::B => "B",
        })
    }
}

impl FromStr for Zone {
    type Err = PszError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "A" | "a" => Ok(Zone::A),
            "B" | "b" => Ok(Zone::B),
            other => Err(PszError::UnknownListener(other.to_string())),
        }
    }
}

/// Rigid in-plane displacement of one listener's control points.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ListenerDisplacement<T> {
    pub listener: Zone,
    pub dx: T,
    pub dy: T,
}

impl<T: Real> ListenerDisplacement<T> {
    pub fn new(listener: Zone, dx: T, dy: T) -> Self {
        Self { listener, dx, dy }
    }

    pub fn is_zero(&self) -> bool {
        self.dx == T::zero() && self.dy == T::zero()
    }
}

/// Loudspeaker array, control points, and the zone / program partitions.
///
/// All indices are 0-based. Input channels are the "full resolution"
/// program channels (two per zone in the default layout); rendering modes
/// that use fewer channels derive them from this list.
#[derive(Debug, Clone, PartialEq)]
pub struct Scene<T> {
    pub speakers: Vec<Vec3<T>>,
    /// Common on-axis direction of all pistons.
    pub speaker_axis: Vec3<T>,
    pub control_points: Vec<Vec3<T>>,
    /// Control-point indices of zone A, ordered left ear then right ear.
    pub zone_a: Vec<usize>,
    pub zone_b: Vec<usize>,
    /// Input-channel indices of the program for zone A.
    pub program_a: Vec<usize>,
    pub program_b: Vec<usize>,
    /// Loudspeaker whose transfer functions define each input channel's target.
    pub virtual_sources: Vec<usize>,
    /// m/s
    pub sound_speed: T,
    /// m
    pub piston_radius: T,
}

/// Reasons a [`Scene`] is not usable.
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    EmptyZone(Zone),
    ZoneOverlap { point: usize },
    ZoneCoverage { point: usize },
    PointOutOfRange { point: usize },
    EmptyProgram(Zone),
    ProgramOverlap { channel: usize },
    ChannelOutOfRange { channel: usize },
    VirtualSourceOutOfRange { channel: usize, speaker: usize },
    Coincident { point: usize, speaker: usize },
    NonPositive(&'static str),
    BadAxis,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::EmptyZone(z) => write!(f, "zone {z} has no control points"),
            Violation::ZoneOverlap { point } => write!(f, "control point {} assigned to both zones", point + 1),
            Violation::ZoneCoverage { point } => write!(f, "control point {} not assigned to any zone", point + 1),
            Violation::PointOutOfRange { point } => write!(f, "zone references missing control point {}", point + 1),
            Violation::EmptyProgram(z) => write!(f, "program {z} has no input channels"),
            Violation::ProgramOverlap { channel } => write!(f, "channel {} assigned to both programs", channel + 1),
            Violation::ChannelOutOfRange { channel } => {
                write!(f, "program references channel {} without a virtual source", channel + 1)
            }
            Violation::VirtualSourceOutOfRange { channel, speaker } => {
                write!(f, "channel {} maps to missing loudspeaker {}", channel + 1, speaker + 1)
            }
            Violation::Coincident { point, speaker } => {
                write!(f, "control point {} coincides with loudspeaker {}", point + 1, speaker + 1)
            }
            Violation::NonPositive(what) => write!(f, "{what} must be positive"),
            Violation::BadAxis => write!(f, "speaker axis must be a nonzero vector"),
        }
    }
}

impl<T: Real> Scene<T> {
    /// Eight-unit linear array (25 cm pitch) along x, two listeners 1 m in
    /// front of it with ear pairs 16.8 cm wide and zone centers 1 m apart.
    ///
    /// Channels 0,1 (zone A) use loudspeakers 0 and 3 as virtual sources;
    /// channels 2,3 (zone B) use loudspeakers 4 and 7.
    pub fn paper_default() -> Self {
        let pitch = T::lit(0.25);
        let n = 8;
        let half_span = pitch * T::lit((n - 1) as f64) * T::lit(0.5);
        let speakers = (0..n).map(|l| Vec3::xy(-half_span + pitch * T::lit(l as f64), T::zero())).collect();

        let y = T::one();
        let half_ear = T::lit(0.168) * T::lit(0.5);
        let center = T::lit(0.5);
        // B is the exact mirror image of A
        let control_points = vec![
            Vec3::xy(-(center + half_ear), y),
            Vec3::xy(-(center - half_ear), y),
            Vec3::xy(center - half_ear, y),
            Vec3::xy(center + half_ear, y),
        ];
        Self {
            speakers,
            speaker_axis: Vec3::new(T::zero(), T::one(), T::zero()),
            control_points,
            zone_a: vec![0, 1],
            zone_b: vec![2, 3],
            program_a: vec![0, 1],
            program_b: vec![2, 3],
            virtual_sources: vec![0, 3, 4, 7],
            sound_speed: T::lit(343.0),
            piston_radius: T::lit(0.05),
        }
    }

    pub fn zone_points(&self, zone: Zone) -> &[usize] {
        match zone {
            Zone::A => &self.zone_a,
            Zone::B => &self.zone_b,
        }
    }

    pub fn program_channels(&self, zone: Zone) -> &[usize] {
        match zone {
            Zone::A => &self.program_a,
            Zone::B => &self.program_b,
        }
    }

    pub fn channel_count(&self) -> usize {
        self.virtual_sources.len()
    }

    /// Centroid of a zone's control points.
    pub fn zone_center(&self, zone: Zone) -> Vec3<T> {
        let pts = self.zone_points(zone);
        let sum = pts.iter().fold(Vec3::default(), |acc, &k| acc + self.control_points[k]);
        sum.scale(T::one() / T::from_usize(pts.len().max(1)).unwrap())
    }

    /// Translates the listener's control points by `(dx, dy, 0)`.
    pub fn move_listener(&self, d: &ListenerDisplacement<T>) -> Self {
        let mut out = self.clone();
        let shift = Vec3::xy(d.dx, d.dy);
        for &k in self.zone_points(d.listener) {
            out.control_points[k] = out.control_points[k] + shift;
        }
        out
    }

    /// Lists every broken invariant; empty when the scene is usable.
    pub fn validate(&self) -> Vec<Violation> {
        let mut v = Vec::new();
        let kp = self.control_points.len();

        for zone in [Zone::A, Zone::B] {
            if self.zone_points(zone).is_empty() {
                v.push(Violation::EmptyZone(zone));
            }
        }
        let mut owner = vec![0u8; kp];
        for &k in self.zone_a.iter().chain(&self.zone_b) {
            match owner.get_mut(k) {
                Some(o) => *o += 1,
                None => v.push(Violation::PointOutOfRange { point: k }),
            }
        }
        for (k, &o) in owner.iter().enumerate() {
            match o {
                0 => v.push(Violation::ZoneCoverage { point: k }),
                1 => {}
                _ => v.push(Violation::ZoneOverlap { point: k }),
            }
        }

        for zone in [Zone::A, Zone::B] {
            if self.program_channels(zone).is_empty() {
                v.push(Violation::EmptyProgram(zone));
            }
        }
        let nch = self.virtual_sources.len();
        let mut ch_owner = vec![0u8; nch];
        for &i in self.program_a.iter().chain(&self.program_b) {
            match ch_owner.get_mut(i) {
                Some(o) => {
                    *o += 1;
                    if *o == 2 {
                        v.push(Violation::ProgramOverlap { channel: i });
                    }
                }
                None => v.push(Violation::ChannelOutOfRange { channel: i }),
            }
        }
        for (channel, &speaker) in self.virtual_sources.iter().enumerate() {
            if speaker >= self.speakers.len() {
                v.push(Violation::VirtualSourceOutOfRange { channel, speaker });
            }
        }

        for (point, &p) in self.control_points.iter().enumerate() {
            for (speaker, &s) in self.speakers.iter().enumerate() {
                if !(p.distance(s) > T::zero()) {
                    v.push(Violation::Coincident { point, speaker });
                }
            }
        }
        if !(self.sound_speed > T::zero()) {
            v.push(Violation::NonPositive("sound speed"));
        }
        if !(self.piston_radius > T::zero()) {
            v.push(Violation::NonPositive("piston radius"));
        }
        if !(self.speaker_axis.norm() > T::zero()) {
            v.push(Violation::BadAxis);
        }
        v
    }

    /// [`validate`](Self::validate) folded into a `Result`.
    pub fn check(&self) -> Result<(), PszError> {
        let v = self.validate();
        if v.is_empty() {
            Ok(())
        } else {
            let msg = v.iter().map(ToString::to_string).collect::<Vec<_>>().join("; ");
            Err(PszError::InvalidScene(msg))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    type S = Scene<f64>;

    #[test]
    fn default_array_geometry() {
        let s = S::paper_default();
        assert_eq!(s.speakers.len(), 8);
        for w in s.speakers.windows(2) {
            assert!((w[0].distance(w[1]) - 0.25).abs() < 1e-15);
            assert_eq!(w[0].y, 0.0);
        }
        let ear = s.control_points[0].distance(s.control_points[1]);
        assert!((ear - 0.168).abs() < 1e-15);
        let ca = s.zone_center(Zone::A);
        let cb = s.zone_center(Zone::B);
        assert!((ca.distance(cb) - 1.0).abs() < 1e-15);
        assert!((ca.y - 1.0).abs() < 1e-15);
        assert_eq!(s.virtual_sources, vec![0, 3, 4, 7]);
        assert!(s.validate().is_empty());
    }

    #[test]
    fn default_scene_is_mirror_symmetric() {
        let s = S::paper_default();
        let n = s.speakers.len();
        for l in 0..n {
            assert_eq!(s.speakers[l].x, -s.speakers[n - 1 - l].x);
        }
        // A ear k mirrors onto B ear (1-k)
        for (a, b) in s.zone_a.iter().zip(s.zone_b.iter().rev()) {
            let (pa, pb) = (s.control_points[*a], s.control_points[*b]);
            assert_eq!(pa.x, -pb.x);
            assert_eq!(pa.y, pb.y);
        }
    }

    #[test]
    fn zero_move_is_identity() {
        let s = S::paper_default();
        assert_eq!(s.move_listener(&ListenerDisplacement::new(Zone::A, 0.0, 0.0)), s);
    }

    #[test]
    fn moving_listener_is_rigid() {
        let s = S::paper_default();
        let m = s.move_listener(&ListenerDisplacement::new(Zone::A, -0.3, -0.2));
        let ear = m.control_points[0].distance(m.control_points[1]);
        assert!((ear - 0.168).abs() < 1e-15);
        assert!((m.zone_center(Zone::A).x - (-0.8)).abs() < 1e-12);
        assert!((m.zone_center(Zone::A).y - 0.8).abs() < 1e-12);
        assert_eq!(m.control_points[2..], s.control_points[2..]);
        assert_eq!(m.speakers, s.speakers);

        let mb = s.move_listener(&ListenerDisplacement::new(Zone::B, 0.1, 0.0));
        assert!((mb.zone_center(Zone::B).x - s.zone_center(Zone::B).x - 0.1).abs() < 1e-12);
    }

    #[test]
    fn unknown_listener_label() {
        assert_eq!("a".parse::<Zone>().unwrap(), Zone::A);
        assert!(matches!("C".parse::<Zone>(), Err(PszError::UnknownListener(_))));
    }

    #[test]
    fn overlapping_zones_reported() {
        let mut s = S::paper_default();
        s.zone_b = s.zone_a.clone();
        let v = s.validate();
        assert!(v.iter().any(|x| matches!(x, Violation::ZoneOverlap { .. })));
        assert!(v.iter().any(|x| matches!(x, Violation::ZoneCoverage { .. })));
    }

    #[test]
    fn coincident_speaker_reported() {
        let mut s = S::paper_default();
        s.control_points[2] = s.speakers[5];
        let v = s.validate();
        assert_eq!(v, vec![Violation::Coincident { point: 2, speaker: 5 }]);
        assert!(s.check().is_err());
    }

    #[test]
    fn bad_channel_maps_reported() {
        let mut s = S::paper_default();
        s.virtual_sources[1] = 8;
        s.program_b = vec![1, 2];
        let v = s.validate();
        assert!(v.contains(&Violation::VirtualSourceOutOfRange { channel: 1, speaker: 8 }));
        assert!(v.contains(&Violation::ProgramOverlap { channel: 1 }));
    }
}
