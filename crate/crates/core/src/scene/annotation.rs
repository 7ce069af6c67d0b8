//! Per-recording annotation CSV.

use std::io::{Read, Write};

use super::direction::Direction;
use super::spec::EventInstance;
use crate::error::{Result, SeldError};

pub const ANNOTATION_HEADER: [&str; 6] = ["class_id", "onset_s", "offset_s", "azimuth_deg", "elevation_deg", "distance_m"];

fn writer<W: Write>(w: W) -> csv::Writer<W> {
    csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(w)
}

/// Writes annotations; floats use the shortest representation that parses
/// back to the same value.
pub fn write_annotations<W: Write>(w: W, events: &[EventInstance]) -> Result<()> {
    let mut out = writer(w);
    out.write_record(ANNOTATION_HEADER).map_err(csv_err)?;
    for e in events {
        out.write_record([
            e.class_id.to_string(),
            format!("{}", e.onset),
            format!("{}", e.offset),
            format!("{}", e.direction.azimuth),
            format!("{}", e.direction.elevation),
            format!("{}", e.distance),
        ])
        .map_err(csv_err)?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_annotations<R: Read>(r: R) -> Result<Vec<EventInstance>> {
    let mut rdr = csv::Reader::from_reader(r);
    let header = rdr.headers().map_err(csv_err)?;
    if header.iter().ne(ANNOTATION_HEADER) {
        return Err(SeldError::Format(format!("unexpected annotation header {header:?}")));
    }
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(csv_err)?;
        let f = |i: usize| -> Result<f64> {
            rec[i]
                .parse()
                .map_err(|_| SeldError::Format(format!("bad number {:?} in column {}", &rec[i], ANNOTATION_HEADER[i])))
        };
        let class_id = rec[0]
            .parse()
            .map_err(|_| SeldError::Format(format!("bad class id {:?}", &rec[0])))?;
        out.push(EventInstance {
            class_id,
            onset: f(1)?,
            offset: f(2)?,
            direction: Direction::new(f(3)?, f(4)?)?,
            distance: f(5)?,
        });
    }
    Ok(out)
}

pub(crate) fn csv_err(e: csv::Error) -> SeldError {
    SeldError::Format(e.to_string())
}
