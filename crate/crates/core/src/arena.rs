//! Grid-map arenas: loading, free-space queries, raycasting and patrol counts.
//!
//! World coordinates put the origin at the top-left corner of the map, `x`
//! growing along a row and `y` growing down the rows. A point belongs to the
//! cell `(floor(x / cell_size), floor(y / cell_size))`, so points on a cell
//! boundary belong to the higher-index cell.

use std::fmt;
use std::path::Path;
use std::sync::Arc;

use crate::error::{Error, Result};

/// A point in world units.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(self, other: Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    /// The point `dist` world units away along `angle`.
    pub fn advance(self, angle: f64, dist: f64) -> Point {
        Point::new(self.x + dist * angle.cos(), self.y + dist * angle.sin())
    }
}

/// Position plus heading (radians, 0 along +x).
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Pose {
    pub x: f64,
    pub y: f64,
    pub heading: f64,
}

impl Pose {
    pub fn position(&self) -> Point {
        Point::new(self.x, self.y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Cell {
    Wall,
    Free,
}

/// An immutable, closed grid world.
#[derive(Debug, Clone)]
pub struct Arena {
    width: usize,
    height: usize,
    cell_size: f64,
    free: Arc<[bool]>,
    start: Pose,
}

impl Arena {
    /// Parses the text arena format:
    ///
    /// ```text
    /// % comment
    /// arena <width> <height> <cell_size>
    /// #####
    /// #S..#
    /// #####
    /// ```
    pub fn parse(text: &str) -> Result<Arena> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.strip_suffix('\r').unwrap_or(l)))
            .filter(|(_, l)| !l.starts_with('%'));

        let (header_line, header) = loop {
            match lines.next() {
                Some((_, l)) if l.trim().is_empty() => continue,
                Some(found) => break found,
                None => return Err(parse_err(0, "missing `arena` header")),
            }
        };
        let (width, height, cell_size) = parse_header(header_line, header)?;

        let mut free = Vec::with_capacity(width * height);
        let mut start = None;
        let mut last_line = header_line;
        for row in 0..height {
            let (line_no, line) = lines.next().ok_or_else(|| {
                parse_err(
                    last_line,
                    format!("expected {height} map rows, found {row}"),
                )
            })?;
            last_line = line_no;
            let chars: Vec<char> = line.chars().collect();
            if chars.len() != width {
                return Err(parse_err(
                    line_no,
                    format!("ragged row: expected {width} cells, found {}", chars.len()),
                ));
            }
            for (col, ch) in chars.into_iter().enumerate() {
                let is_border = row == 0 || col == 0 || row + 1 == height || col + 1 == width;
                match ch {
                    '#' => free.push(false),
                    '.' | 'S' => {
                        if is_border {
                            return Err(parse_err(
                                line_no,
                                format!("open border at column {}", col + 1),
                            ));
                        }
                        if ch == 'S' {
                            if start.is_some() {
                                return Err(parse_err(line_no, "multiple start markers"));
                            }
                            start = Some(Pose {
                                x: (col as f64 + 0.5) * cell_size,
                                y: (row as f64 + 0.5) * cell_size,
                                heading: 0.0,
                            });
                        }
                        free.push(true);
                    }
                    other => {
                        return Err(parse_err(
                            line_no,
                            format!("unexpected character {other:?} at column {}", col + 1),
                        ))
                    }
                }
            }
        }
        if let Some((line_no, extra)) = lines.find(|(_, l)| !l.trim().is_empty()) {
            return Err(parse_err(
                line_no,
                format!("unexpected content after the map: {extra:?}"),
            ));
        }
        let start = start.ok_or_else(|| parse_err(last_line, "no start marker"))?;

        Ok(Arena {
            width,
            height,
            cell_size,
            free: free.into(),
            start,
        })
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Arena> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Arena::parse(&text)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn cell_size(&self) -> f64 {
        self.cell_size
    }

    pub fn start_pose(&self) -> Pose {
        self.start
    }

    pub fn cell(&self, col: usize, row: usize) -> Cell {
        if self.free[row * self.width + col] {
            Cell::Free
        } else {
            Cell::Wall
        }
    }

    /// Row-major free-cell mask, shared with patrol grids.
    pub fn free_mask(&self) -> &Arc<[bool]> {
        &self.free
    }

    pub fn free_cell_count(&self) -> usize {
        self.free.iter().filter(|&&f| f).count()
    }

    /// Length of the map diagonal in world units.
    pub fn diagonal(&self) -> f64 {
        (self.width as f64 * self.cell_size).hypot(self.height as f64 * self.cell_size)
    }

    /// `(col, row)` of the cell containing `p`, or `None` outside the grid.
    pub fn cell_of(&self, p: Point) -> Option<(usize, usize)> {
        let col = (p.x / self.cell_size).floor();
        let row = (p.y / self.cell_size).floor();
        if !(col >= 0.0 && row >= 0.0) || col >= self.width as f64 || row >= self.height as f64 {
            return None;
        }
        Some((col as usize, row as usize))
    }

    /// Row-major index of the cell containing `p`.
    pub fn cell_index(&self, p: Point) -> Option<usize> {
        self.cell_of(p).map(|(c, r)| r * self.width + c)
    }

    pub fn is_free(&self, p: Point) -> bool {
        self.cell_index(p).is_some_and(|i| self.free[i])
    }

    fn is_free_cell(&self, col: i64, row: i64) -> bool {
        col >= 0
            && row >= 0
            && (col as usize) < self.width
            && (row as usize) < self.height
            && self.free[row as usize * self.width + col as usize]
    }

    /// Distance from `origin` to the first wall boundary along `angle`,
    /// clamped to `max_range`. Walks the grid cell by cell.
    pub fn raycast(&self, origin: Point, angle: f64, max_range: f64) -> Result<f64> {
        if !self.is_free(origin) {
            return Err(Error::OriginInWall {
                x: origin.x,
                y: origin.y,
            });
        }
        if !(max_range > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "max_range must be positive, got {max_range}"
            )));
        }
        let (dy, dx) = angle.sin_cos();
        let cs = self.cell_size;
        let (col0, row0) = self.cell_of(origin).expect("free origin lies in the grid");
        let (mut col, mut row) = (col0 as i64, row0 as i64);
        let step_col = dx.signum() as i64;
        let step_row = dy.signum() as i64;

        loop {
            // Boundaries are recomputed from the cell index each step so the
            // distance never accumulates rounding drift.
            let t_col = boundary_distance(origin.x, dx, col, cs);
            let t_row = boundary_distance(origin.y, dy, row, cs);
            let t = t_col.min(t_row);
            if t >= max_range {
                return Ok(max_range);
            }
            if t_col < t_row {
                col += step_col;
            } else if t_row < t_col {
                row += step_row;
            } else {
                // Exact corner crossing: the corner point belongs to the
                // diagonal neighbour.
                col += step_col;
                row += step_row;
            }
            if !self.is_free_cell(col, row) {
                return Ok(t.max(0.0));
            }
        }
    }
}

fn boundary_distance(origin: f64, dir: f64, cell: i64, cell_size: f64) -> f64 {
    if dir > 0.0 {
        ((cell + 1) as f64 * cell_size - origin) / dir
    } else if dir < 0.0 {
        (cell as f64 * cell_size - origin) / dir
    } else {
        f64::INFINITY
    }
}

/// Parses `text` as an arena.
pub fn load_arena(text: &str) -> Result<Arena> {
    Arena::parse(text)
}

fn parse_err(line: usize, msg: impl Into<String>) -> Error {
    Error::ArenaParse {
        line,
        msg: msg.into(),
    }
}

fn parse_header(line_no: usize, line: &str) -> Result<(usize, usize, f64)> {
    let fields: Vec<&str> = line.split_whitespace().collect();
    let [tag, w, h, cs] = fields.as_slice() else {
        return Err(parse_err(
            line_no,
            "malformed header, expected `arena <width> <height> <cell_size>`",
        ));
    };
    if *tag != "arena" {
        return Err(parse_err(line_no, format!("malformed header: unknown tag {tag:?}")));
    }
    let dim = |s: &str, name: &str| -> Result<usize> {
        match s.parse::<usize>() {
            Ok(v) if v >= 3 => Ok(v),
            Ok(v) => Err(parse_err(line_no, format!("malformed header: {name} {v} is below 3"))),
            Err(_) => Err(parse_err(line_no, format!("malformed header: bad {name} {s:?}"))),
        }
    };
    let width = dim(w, "width")?;
    let height = dim(h, "height")?;
    let cell_size = match cs.parse::<f64>() {
        Ok(v) if v > 0.0 && v.is_finite() => v,
        _ => return Err(parse_err(line_no, format!("malformed header: bad cell_size {cs:?}"))),
    };
    Ok((width, height, cell_size))
}

impl fmt::Display for Arena {
    /// Writes the arena back in its text format.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "arena {} {} {}", self.width, self.height, self.cell_size)?;
        let start = self.cell_of(self.start.position());
        for row in 0..self.height {
            for col in 0..self.width {
                let ch = if start == Some((col, row)) {
                    'S'
                } else if self.free[row * self.width + col] {
                    '.'
                } else {
                    '#'
                };
                write!(f, "{ch}")?;
            }
            writeln!(f)?;
        }
        Ok(())
    }
}

/// Per-cell visit counts over an arena's grid.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PatrolGrid {
    width: usize,
    height: usize,
    cell_size_bits: u64,
    free: Arc<[bool]>,
    counts: Vec<u32>,
}

impl PatrolGrid {
    pub fn new(arena: &Arena) -> Self {
        PatrolGrid {
            width: arena.width,
            height: arena.height,
            cell_size_bits: arena.cell_size.to_bits(),
            free: Arc::clone(&arena.free),
            counts: vec![0; arena.width * arena.height],
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    /// Row-major counts; wall cells are always 0.
    pub fn counts(&self) -> &[u32] {
        &self.counts
    }

    pub fn is_free_index(&self, idx: usize) -> bool {
        self.free[idx]
    }

    pub fn count_at(&self, col: usize, row: usize) -> u32 {
        self.counts[row * self.width + col]
    }

    /// Increments the cell containing `p`. Points outside free space are
    /// ignored so wall cells keep a zero count.
    pub fn record_visit(&mut self, p: Point) {
        let cs = f64::from_bits(self.cell_size_bits);
        let col = (p.x / cs).floor();
        let row = (p.y / cs).floor();
        if !(col >= 0.0 && row >= 0.0) || col >= self.width as f64 || row >= self.height as f64 {
            return;
        }
        self.add_to_cell(row as usize * self.width + col as usize, 1);
    }

    /// Adds `n` visits to the cell at row-major `idx`; wall cells are ignored.
    pub fn add_to_cell(&mut self, idx: usize, n: u32) {
        if self.free[idx] {
            self.counts[idx] += n;
        }
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().map(|&c| c as u64).sum()
    }

    pub fn free_cells(&self) -> usize {
        self.free.iter().filter(|&&f| f).count()
    }

    /// Free cells whose count reaches `ell`.
    pub fn cells_at_least(&self, ell: u32) -> usize {
        self.counts
            .iter()
            .zip(self.free.iter())
            .filter(|&(&c, &f)| f && c >= ell)
            .count()
    }

    /// Adds `other`'s counts cell by cell. Both grids must come from the
    /// same arena.
    pub fn merge(&mut self, other: &PatrolGrid) {
        assert_eq!(
            (self.width, self.height),
            (other.width, other.height),
            "merging patrol grids of different arenas"
        );
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += *b;
        }
    }

    /// Sparse `(cell index, count)` pairs for visited cells, in index order.
    pub fn to_sparse(&self) -> Vec<(u32, u32)> {
        self.counts
            .iter()
            .enumerate()
            .filter(|(_, &c)| c > 0)
            .map(|(i, &c)| (i as u32, c))
            .collect()
    }

    pub fn add_sparse(&mut self, visits: &[(u32, u32)]) {
        for &(idx, n) in visits {
            self.add_to_cell(idx as usize, n);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SMALL: &str = "\
% a 6x5 room with a pillar
arena 6 5 2.0
######
#S...#
#..#.#
#....#
######
";

    #[test]
    fn minimal_arena() {
        let a = Arena::parse("arena 3 3 1\n###\n#S#\n###\n").unwrap();
        assert_eq!(a.free_cell_count(), 1);
        assert_eq!(a.start_pose(), Pose { x: 1.5, y: 1.5, heading: 0.0 });
        assert_eq!(a.cell(1, 1), Cell::Free);
        assert_eq!(a.cell(0, 1), Cell::Wall);
    }

    fn err_line(text: &str) -> (usize, String) {
        match Arena::parse(text) {
            Err(Error::ArenaParse { line, msg }) => (line, msg),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn rejects_multiple_starts() {
        let (line, msg) = err_line("arena 4 3 1\n####\n#SS#\n####\n");
        assert_eq!(line, 3);
        assert!(msg.contains("multiple start markers"), "{msg}");
    }

    #[test]
    fn rejects_missing_start() {
        let (_, msg) = err_line("arena 3 3 1\n###\n#.#\n###\n");
        assert!(msg.contains("no start marker"));
    }

    #[test]
    fn rejects_ragged_rows() {
        let (line, msg) = err_line("arena 4 3 1\n####\n#S#\n####\n");
        assert_eq!(line, 3);
        assert!(msg.contains("ragged"));
    }

    #[test]
    fn rejects_open_border() {
        let (line, msg) = err_line("% c\narena 4 3 1\n#.##\n#S.#\n####\n");
        assert_eq!(line, 3);
        assert!(msg.contains("open border"));
    }

    #[test]
    fn rejects_bad_headers() {
        for text in [
            "",
            "arena 3 3\n",
            "maze 3 3 1\n",
            "arena 2 3 1\n",
            "arena 3 3 -1\n",
            "arena x 3 1\n",
        ] {
            let (_, msg) = err_line(text);
            assert!(msg.contains("header"), "{text:?}: {msg}");
        }
    }

    #[test]
    fn rejects_short_map_and_trailing_garbage() {
        let (_, msg) = err_line("arena 3 3 1\n###\n#S#\n");
        assert!(msg.contains("expected 3 map rows"));
        let (line, _) = err_line("arena 3 3 1\n###\n#S#\n###\n###\n");
        assert_eq!(line, 5);
    }

    #[test]
    fn display_round_trips() {
        let a = Arena::parse(SMALL).unwrap();
        let b = Arena::parse(&a.to_string()).unwrap();
        assert_eq!(a.to_string(), b.to_string());
        assert_eq!(a.start_pose(), b.start_pose());
    }

    #[test]
    fn free_space_queries() {
        let a = Arena::parse(SMALL).unwrap();
        assert!(a.is_free(a.start_pose().position()));
        assert!(!a.is_free(Point::new(-1.0, -1.0)));
        assert!(!a.is_free(Point::new(100.0, 3.0)));
        // x = 6.0 is the boundary between columns 2 (free) and 3; with
        // cell_size 2 it belongs to column 3, which is the pillar at row 2.
        assert!(!a.is_free(Point::new(6.0, 5.0)));
        assert!(a.is_free(Point::new(5.999, 5.0)));
        assert_eq!(a.cell_of(Point::new(2.0, 2.0)), Some((1, 1)));
    }

    #[test]
    fn raycast_axis_aligned() {
        let a = Arena::parse(SMALL).unwrap();
        // Right wall starts at x = 10.
        let d = a.raycast(Point::new(8.0, 3.0), 0.0, 10.0).unwrap();
        assert!((d - 2.0).abs() < 1e-9, "{d}");
        let up = a.raycast(Point::new(3.0, 3.0), -std::f64::consts::FRAC_PI_2, 10.0).unwrap();
        assert!((up - 1.0).abs() < 1e-9, "{up}");
        // Clamped.
        assert_eq!(a.raycast(Point::new(8.0, 3.0), 0.0, 1.5).unwrap(), 1.5);
    }

    #[test]
    fn raycast_rejects_wall_origin() {
        let a = Arena::parse(SMALL).unwrap();
        assert!(matches!(
            a.raycast(Point::new(0.5, 0.5), 0.0, 3.0),
            Err(Error::OriginInWall { .. })
        ));
        assert!(a.raycast(Point::new(3.0, 3.0), 0.0, 0.0).is_err());
    }

    #[test]
    fn patrol_counts() {
        let a = Arena::parse(SMALL).unwrap();
        let mut g = PatrolGrid::new(&a);
        let s = a.start_pose().position();
        g.record_visit(s);
        assert_eq!(g.total(), 1);
        assert_eq!(g.count_at(1, 1), 1);
        for _ in 0..9 {
            g.record_visit(s);
        }
        assert_eq!(g.count_at(1, 1), 10);
        // Walls never count.
        g.record_visit(Point::new(0.5, 0.5));
        g.record_visit(Point::new(-3.0, 0.5));
        assert_eq!(g.total(), 10);
        assert_eq!(g.cells_at_least(10), 1);

        let mut h = PatrolGrid::new(&a);
        h.add_sparse(&g.to_sparse());
        h.merge(&g);
        assert_eq!(h.count_at(1, 1), 20);
    }
}
