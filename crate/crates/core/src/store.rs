//! Splittable splay trees over key pairs with lazy rank-affine moment
//! updates.
//!
//! One store per tree vertex, all sharing a single flat arena owned by one
//! solve call. A node's `moment` is the k of its key pair; a pending tag
//! `(a, b)` on a node means every descendant y must still receive
//! `rank_within_subtree(y) * a + b` added to its moment. Tags are pushed down
//! before any structural change, so in-order moment order is preserved by
//! every operation.
//!
//! In-order moments are kept non-decreasing; equal moments (possible across
//! sibling subtrees between a merge and the following update) insert after
//! existing ones, which preserves every "moment <= k" count the queries rely
//! on.

use thiserror::Error;

pub type NodeId = u32;
pub const NIL: NodeId = u32::MAX;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum StoreError {
    #[error("store is empty")]
    EmptyStore,
    #[error("split restored {found} nodes where {expected} were merged")]
    InvariantViolation { expected: u32, found: u32 },
}

// 48 bytes; the rank coefficient accumulates at most one unit per update or
// revert, so i32 holds it with room to spare.
#[derive(Debug, Clone)]
struct Node {
    moment: i64,
    lazy_b: i64,
    lazy_a: i32,
    timestamp: u32,
    timemin: u32,
    timemax: u32,
    size: u32,
    left: NodeId,
    right: NodeId,
    parent: NodeId,
}

/// The family of per-vertex stores for one solve, plus the swap bookkeeping
/// merge leaves behind for split.
pub struct StoreFamily {
    nodes: Vec<Node>,
    roots: Vec<NodeId>,
    swapped: Vec<bool>,
    merged_size: Vec<u32>,
    flat_stack: Vec<NodeId>,
    flat_run: Vec<NodeId>,
}

impl StoreFamily {
    pub fn new(vertex_count: usize) -> StoreFamily {
        StoreFamily {
            nodes: Vec::new(),
            roots: vec![NIL; vertex_count],
            swapped: vec![false; vertex_count],
            merged_size: vec![0; vertex_count],
            flat_stack: Vec::new(),
            flat_run: Vec::new(),
        }
    }

    pub fn with_node_capacity(vertex_count: usize, nodes: usize) -> StoreFamily {
        let mut f = Self::new(vertex_count);
        f.nodes.reserve(nodes);
        f
    }

    /// Total nodes ever created; the solvers assert this stays within the
    /// O(n) budget.
    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn store_size(&self, u: usize) -> u32 {
        self.size(self.roots[u])
    }

    pub fn is_empty(&self, u: usize) -> bool {
        self.roots[u] == NIL
    }

    pub fn moment(&self, x: NodeId) -> i64 {
        self.nodes[x as usize].moment
    }

    pub fn timestamp(&self, x: NodeId) -> u32 {
        self.nodes[x as usize].timestamp
    }

    fn size(&self, x: NodeId) -> u32 {
        if x == NIL {
            0
        } else {
            self.nodes[x as usize].size
        }
    }

    fn n(&self, x: NodeId) -> &Node {
        &self.nodes[x as usize]
    }

    /// Hint the next pointer-chase target into cache; descents fetch both
    /// children before branching so the two loads overlap.
    #[inline(always)]
    fn prefetch(&self, x: NodeId) {
        #[cfg(target_arch = "x86_64")]
        if x != NIL {
            unsafe {
                std::arch::x86_64::_mm_prefetch(
                    self.nodes.as_ptr().add(x as usize) as *const i8,
                    std::arch::x86_64::_MM_HINT_T0,
                );
            }
        }
        #[cfg(not(target_arch = "x86_64"))]
        let _ = x;
    }

    fn n_mut(&mut self, x: NodeId) -> &mut Node {
        &mut self.nodes[x as usize]
    }

    pub fn new_node(&mut self, moment: i64, timestamp: u32) -> NodeId {
        let id = self.nodes.len() as NodeId;
        self.nodes.push(Node {
            moment,
            lazy_b: 0,
            lazy_a: 0,
            timestamp,
            timemin: timestamp,
            timemax: timestamp,
            size: 1,
            left: NIL,
            right: NIL,
            parent: NIL,
        });
        id
    }

    /// Logically adds rank-within-subtree * a + b to every moment under x;
    /// physically touches only x and defers the rest through lazy tags.
    pub fn inc_time(&mut self, x: NodeId, a: i64, b: i64) {
        if x == NIL || (a == 0 && b == 0) {
            return;
        }
        let sl = self.size(self.n(x).left) as i64;
        let node = self.n_mut(x);
        node.moment += (sl + 1) * a + b;
        node.lazy_a += a as i32;
        node.lazy_b += b;
    }

    pub fn inc_time_root(&mut self, u: usize, a: i64, b: i64) {
        let root = self.roots[u];
        self.inc_time(root, a, b);
    }

    /// Transfers x's pending tags to its children. The right child's
    /// constant part absorbs the rank offset of x's left subtree plus x.
    fn push_down(&mut self, x: NodeId) {
        let (a, b) = {
            let node = self.n(x);
            (node.lazy_a as i64, node.lazy_b)
        };
        if a == 0 && b == 0 {
            return;
        }
        let (l, r, sl) = {
            let node = self.n(x);
            (node.left, node.right, self.size(node.left) as i64)
        };
        self.inc_time(l, a, b);
        self.inc_time(r, a, b + (sl + 1) * a);
        let node = self.n_mut(x);
        node.lazy_a = 0;
        node.lazy_b = 0;
    }

    fn push_up(&mut self, x: NodeId) {
        let (l, r, ts) = {
            let node = self.n(x);
            (node.left, node.right, node.timestamp)
        };
        let mut size = 1;
        let mut tmin = ts;
        let mut tmax = ts;
        if l != NIL {
            let ln = self.n(l);
            size += ln.size;
            tmin = tmin.min(ln.timemin);
            tmax = tmax.max(ln.timemax);
        }
        if r != NIL {
            let rn = self.n(r);
            size += rn.size;
            tmin = tmin.min(rn.timemin);
            tmax = tmax.max(rn.timemax);
        }
        let node = self.n_mut(x);
        node.size = size;
        node.timemin = tmin;
        node.timemax = tmax;
    }

    fn rotate(&mut self, x: NodeId) {
        let y = self.n(x).parent;
        let z = self.n(y).parent;
        debug_assert!(self.n(y).lazy_a == 0 && self.n(y).lazy_b == 0);
        debug_assert!(self.n(x).lazy_a == 0 && self.n(x).lazy_b == 0);
        if self.n(y).left == x {
            let b = self.n(x).right;
            self.n_mut(y).left = b;
            if b != NIL {
                self.n_mut(b).parent = y;
            }
            self.n_mut(x).right = y;
        } else {
            let b = self.n(x).left;
            self.n_mut(y).right = b;
            if b != NIL {
                self.n_mut(b).parent = y;
            }
            self.n_mut(x).left = y;
        }
        self.n_mut(y).parent = x;
        self.n_mut(x).parent = z;
        if z != NIL {
            if self.n(z).left == y {
                self.n_mut(z).left = x;
            } else {
                self.n_mut(z).right = x;
            }
        }
        self.push_up(y);
        self.push_up(x);
    }

    /// Splays x until its parent is `guard` (NIL for all the way to the
    /// root). Callers reach x by a push-down descent from the root, so the
    /// path above x carries no pending tags; rotations act on true values.
    fn splay(&mut self, x: NodeId, guard: NodeId) {
        #[cfg(debug_assertions)]
        {
            let mut cur = self.n(x).parent;
            while cur != guard {
                let node = self.n(cur);
                debug_assert!(
                    node.lazy_a == 0 && node.lazy_b == 0,
                    "splay path carries pending tags"
                );
                cur = node.parent;
            }
        }
        while self.n(x).parent != guard {
            let y = self.n(x).parent;
            let z = self.n(y).parent;
            if z == guard {
                self.rotate(x);
            } else if (self.n(z).left == y) == (self.n(y).left == x) {
                self.rotate(y);
                self.rotate(x);
            } else {
                self.rotate(x);
                self.rotate(x);
            }
        }
    }

    fn splay_to_root(&mut self, u: usize, x: NodeId) {
        self.splay(x, NIL);
        self.roots[u] = x;
    }

    /// In-order-first node, splayed to the root.
    pub fn find_min(&mut self, u: usize) -> Result<NodeId, StoreError> {
        self.find_min_opt(u).ok_or(StoreError::EmptyStore)
    }

    fn find_min_opt(&mut self, u: usize) -> Option<NodeId> {
        let mut x = self.roots[u];
        if x == NIL {
            return None;
        }
        loop {
            self.push_down(x);
            let l = self.n(x).left;
            if l == NIL {
                break;
            }
            self.prefetch(self.n(l).left);
            x = l;
        }
        self.splay_to_root(u, x);
        Some(x)
    }

    /// Detaches the root of D_u, reconnecting its subtrees. The node keeps
    /// its true moment and timestamp and can be reinserted later.
    fn detach_root(&mut self, u: usize) -> NodeId {
        let x = self.roots[u];
        debug_assert_ne!(x, NIL);
        self.push_down(x);
        let (l, r) = {
            let node = self.n(x);
            (node.left, node.right)
        };
        {
            let node = self.n_mut(x);
            node.left = NIL;
            node.right = NIL;
            node.parent = NIL;
            node.size = 1;
            node.timemin = node.timestamp;
            node.timemax = node.timestamp;
        }
        if l != NIL {
            self.n_mut(l).parent = NIL;
        }
        if r != NIL {
            self.n_mut(r).parent = NIL;
        }
        self.roots[u] = if l == NIL {
            r
        } else {
            let mut m = l;
            loop {
                self.push_down(m);
                let next = self.n(m).right;
                if next == NIL {
                    break;
                }
                m = next;
            }
            self.splay(m, NIL);
            self.n_mut(m).right = r;
            if r != NIL {
                self.n_mut(r).parent = m;
            }
            self.push_up(m);
            m
        };
        x
    }

    /// Inserts a detached node by moment; equal moments go after existing
    /// ones.
    pub fn insert(&mut self, u: usize, x: NodeId) {
        debug_assert!(self.n(x).parent == NIL && self.n(x).left == NIL && self.n(x).right == NIL);
        debug_assert!(self.n(x).lazy_a == 0 && self.n(x).lazy_b == 0);
        if self.roots[u] == NIL {
            self.roots[u] = x;
            return;
        }
        let key = self.n(x).moment;
        let mut cur = self.roots[u];
        loop {
            self.push_down(cur);
            let node = self.n(cur);
            self.prefetch(node.left);
            self.prefetch(node.right);
            let go_right = key >= self.n(cur).moment;
            let next = if go_right {
                self.n(cur).right
            } else {
                self.n(cur).left
            };
            if next == NIL {
                if go_right {
                    self.n_mut(cur).right = x;
                } else {
                    self.n_mut(cur).left = x;
                }
                self.n_mut(x).parent = cur;
                break;
            }
            cur = next;
        }
        self.splay_to_root(u, x);
    }

    /// Merges all nodes of D_v into D_u, smaller side into larger: the
    /// smaller store is flattened in order and its nodes inserted one by
    /// one in increasing moment. Records whether the handles were swapped
    /// so split can undo it.
    pub fn merge_store(&mut self, u: usize, v: usize) {
        let su = self.size(self.roots[u]);
        let sv = self.size(self.roots[v]);
        self.merged_size[v] = sv;
        if su < sv {
            self.roots.swap(u, v);
            self.swapped[v] = true;
        } else {
            self.swapped[v] = false;
        }
        if self.roots[v] == NIL {
            return;
        }
        // Flatten the donor in order, materializing every pending tag and
        // resetting links, then feed the ascending run into D_u.
        const EMIT: NodeId = 1 << 31;
        let mut stack = std::mem::take(&mut self.flat_stack);
        let mut run = std::mem::take(&mut self.flat_run);
        stack.clear();
        run.clear();
        stack.push(self.roots[v]);
        while let Some(tag) = stack.pop() {
            if tag & EMIT != 0 {
                run.push(tag & !EMIT);
                continue;
            }
            let x = tag;
            self.push_down(x);
            let node = self.n(x);
            let (l, r) = (node.left, node.right);
            if r != NIL {
                stack.push(r);
            }
            stack.push(x | EMIT);
            if l != NIL {
                stack.push(l);
            }
        }
        self.roots[v] = NIL;
        for &x in run.iter() {
            let node = self.n_mut(x);
            node.left = NIL;
            node.right = NIL;
            node.parent = NIL;
            node.size = 1;
            node.timemin = node.timestamp;
            node.timemax = node.timestamp;
        }
        for i in 0..run.len() {
            self.insert(u, run[i]);
        }
        self.flat_stack = stack;
        self.flat_run = run;
    }

    /// First node (by rank) whose own timestamp is >= t, pruned by subtree
    /// timemax; splays the hit.
    fn find_first_timestamp_ge(&mut self, u: usize, t: u32) -> Option<NodeId> {
        let mut x = self.roots[u];
        if x == NIL || self.n(x).timemax < t {
            return None;
        }
        loop {
            self.push_down(x);
            let l = self.n(x).left;
            if l != NIL && self.n(l).timemax >= t {
                x = l;
            } else if self.n(x).timestamp >= t {
                break;
            } else {
                x = self.n(x).right;
                debug_assert_ne!(x, NIL);
            }
        }
        self.splay_to_root(u, x);
        Some(x)
    }

    /// First node (by rank) whose own timestamp is < t, pruned by subtree
    /// timemin; splays the hit.
    fn find_first_timestamp_lt(&mut self, u: usize, t: u32) -> Option<NodeId> {
        let mut x = self.roots[u];
        if x == NIL || self.n(x).timemin >= t {
            return None;
        }
        loop {
            self.push_down(x);
            let l = self.n(x).left;
            if l != NIL && self.n(l).timemin < t {
                x = l;
            } else if self.n(x).timestamp < t {
                break;
            } else {
                x = self.n(x).right;
                debug_assert_ne!(x, NIL);
            }
        }
        self.splay_to_root(u, x);
        Some(x)
    }

    /// Extracts D_v back out of D_u, exactly undoing the corresponding
    /// merge. Must be called in reverse merge order; membership is decided
    /// by comparing node timestamps against v's first-visit order.
    pub fn split_store(&mut self, u: usize, v: usize, visit_order_v: u32) -> Result<(), StoreError> {
        loop {
            let hit = if self.swapped[v] {
                self.find_first_timestamp_lt(u, visit_order_v)
            } else {
                self.find_first_timestamp_ge(u, visit_order_v)
            };
            match hit {
                None => break,
                Some(_) => {
                    let x = self.detach_root(u);
                    self.insert(v, x);
                }
            }
        }
        if self.swapped[v] {
            self.roots.swap(u, v);
            self.swapped[v] = false;
        }
        let found = self.size(self.roots[v]);
        if found != self.merged_size[v] {
            return Err(StoreError::InvariantViolation {
                expected: self.merged_size[v],
                found,
            });
        }
        Ok(())
    }

    /// Smallest k with psi(k) < degree, where
    /// psi(k) = sigma - |{moment <= k}| - k for non-root vertices and
    /// psi(k) = sigma - |{moment <= k}| at the root. Pops every node with
    /// moment <= result into `popped` (in rank order) for the later revert.
    pub fn compute_c_down(
        &mut self,
        u: usize,
        sigma: i64,
        degree: i64,
        is_root: bool,
        popped: &mut Vec<NodeId>,
    ) -> i64 {
        let chain = i64::from(!is_root);
        let mut now: i64 = 0;
        let mut count: i64 = 0;
        while let Some(x) = self.find_min_opt(u) {
            let m = self.n(x).moment;
            let advance = m == now || count + chain * (m - 1 - now) <= sigma - degree;
            if !advance {
                break;
            }
            let x = self.detach_root(u);
            popped.push(x);
            count += 1 + chain * (m - now);
            now = m;
        }
        let extra = if is_root {
            0
        } else {
            (sigma - count - (degree - 1)).max(0)
        };
        now + extra
    }

    /// Rewrites D_u from "children key pairs above c_down" into u's own key
    /// pairs: shift down by c_down, prepend `degree - 1 - sigma` zero-moment
    /// nodes stamped with u's visit order, then add every node its rank.
    /// Returns how many nodes were inserted (for the revert).
    pub fn update_store(
        &mut self,
        u: usize,
        sigma: i64,
        degree: i64,
        c_down: i64,
        visit_order: u32,
    ) -> u32 {
        self.inc_time_root(u, 0, -c_down);
        let inserted = degree - 1 - sigma;
        debug_assert!(
            (0..=degree - 1).contains(&inserted),
            "settled chip count out of range"
        );
        // The zero-moment nodes all sort before everything already present
        // (moments are strictly positive after the shift), so they can be
        // prelinked as a left chain and grafted in one step.
        if inserted > 0 {
            let old_root = self.roots[u];
            let mut chain = NIL;
            let mut chain_size = 0u32;
            for _ in 0..inserted {
                let x = self.new_node(0, visit_order);
                if chain != NIL {
                    self.n_mut(chain).parent = x;
                }
                chain_size += 1;
                let node = self.n_mut(x);
                node.left = chain;
                node.size = chain_size;
                chain = x;
            }
            if old_root != NIL {
                self.n_mut(old_root).parent = chain;
            }
            self.n_mut(chain).right = old_root;
            self.push_up(chain);
            self.roots[u] = chain;
        }
        self.inc_time_root(u, 1, 0);
        inserted as u32
    }

    /// Exact inverse of `compute_c_down` followed by `update_store`:
    /// afterwards D_u again holds the union of children key pairs.
    pub fn revert_store(&mut self, u: usize, c_down: i64, inserted: u32, popped: &[NodeId]) {
        self.inc_time_root(u, -1, 0);
        for _ in 0..inserted {
            let x = self.find_min_opt(u).expect("inserted node missing");
            debug_assert_eq!(self.n(x).moment, 0);
            self.detach_root(u);
        }
        self.inc_time_root(u, 0, c_down);
        for &x in popped {
            self.insert(u, x);
        }
    }

    /// delta(u, k) = k - |{x in D_u : moment_x <= k}| by a root-to-leaf
    /// walk; splays the last touched node.
    pub fn delta_query(&mut self, u: usize, k: i64) -> i64 {
        let mut now = self.roots[u];
        let mut last = NIL;
        let mut rank: i64 = 0;
        while now != NIL {
            self.push_down(now);
            let node = self.n(now);
            self.prefetch(node.left);
            self.prefetch(node.right);
            last = now;
            if self.n(now).moment <= k {
                rank += self.size(self.n(now).left) as i64 + 1;
                now = self.n(now).right;
            } else {
                now = self.n(now).left;
            }
        }
        if last != NIL {
            self.splay_to_root(u, last);
        }
        k - rank
    }

    /// Deletes every node with moment <= k by repeated find_min; returns how
    /// many were deleted. The path solver aggregates them into a counter
    /// instead of ever reinserting them.
    pub fn path_query(&mut self, u: usize, k: i64) -> i64 {
        let mut removed = 0;
        while let Some(x) = self.find_min_opt(u) {
            if self.n(x).moment > k {
                break;
            }
            self.detach_root(u);
            removed += 1;
        }
        removed
    }

    /// Path variant of the revert: nodes already aggregated into `count`
    /// stay aggregated; physical work happens only for the part of the
    /// update not yet consumed. Returns the updated aggregate.
    pub fn path_revert(
        &mut self,
        u: usize,
        c_down: i64,
        inserted: u32,
        mut count: i64,
        popped: &[NodeId],
    ) -> i64 {
        self.inc_time_root(u, -1, -count);
        if i64::from(inserted) <= count {
            count -= i64::from(inserted);
        } else {
            let mut remaining = i64::from(inserted) - count;
            count = 0;
            while remaining > 0 {
                let x = self.find_min_opt(u).expect("inserted node missing");
                debug_assert_eq!(self.n(x).moment, 0);
                self.detach_root(u);
                remaining -= 1;
            }
        }
        self.inc_time_root(u, 0, c_down);
        if count > 0 {
            count += popped.len() as i64;
        } else {
            for &x in popped {
                self.insert(u, x);
            }
        }
        count
    }

    /// Rewrites the arena so nodes appear in in-order sequence per store.
    /// The top-down pass consumes nodes in rank order, so this makes its
    /// memory traffic near-sequential. `external` ids (the popped-node
    /// stacks) are remapped in place.
    pub fn compact(&mut self, external: &mut [NodeId]) {
        let mut remap = vec![NIL; self.nodes.len()];
        let mut fresh: Vec<Node> = Vec::with_capacity(self.nodes.len());
        const EMIT: NodeId = 1 << 31;
        let mut stack = std::mem::take(&mut self.flat_stack);
        for r in 0..self.roots.len() {
            let root = self.roots[r];
            if root == NIL {
                continue;
            }
            stack.clear();
            stack.push(root);
            while let Some(tag) = stack.pop() {
                if tag & EMIT != 0 {
                    let x = (tag & !EMIT) as usize;
                    remap[x] = fresh.len() as NodeId;
                    fresh.push(self.nodes[x].clone());
                    continue;
                }
                let node = self.n(tag);
                if node.right != NIL {
                    stack.push(node.right);
                }
                stack.push(tag | EMIT);
                if node.left != NIL {
                    stack.push(node.left);
                }
            }
        }
        // Detached nodes (popped runs awaiting revert) go after the live
        // trees, in their recorded order.
        for x in external.iter_mut() {
            if remap[*x as usize] == NIL {
                remap[*x as usize] = fresh.len() as NodeId;
                fresh.push(self.nodes[*x as usize].clone());
            }
            *x = remap[*x as usize];
        }
        for node in fresh.iter_mut() {
            if node.left != NIL {
                node.left = remap[node.left as usize];
            }
            if node.right != NIL {
                node.right = remap[node.right as usize];
            }
            if node.parent != NIL {
                node.parent = remap[node.parent as usize];
            }
        }
        for root in self.roots.iter_mut() {
            if *root != NIL {
                *root = remap[*root as usize];
            }
        }
        self.flat_stack = stack;
        self.nodes = fresh;
    }

    /// In-order (moment, timestamp) pairs with all pending tags applied
    /// virtually; read-only, does not perturb the splay shape.
    pub fn dump(&self, u: usize) -> Vec<(i64, u32)> {
        enum Step {
            Enter(NodeId, i64, i64),
            Emit(NodeId, i64, i64),
        }
        let mut out = Vec::new();
        let mut stack = vec![Step::Enter(self.roots[u], 0, 0)];
        while let Some(step) = stack.pop() {
            match step {
                Step::Enter(x, a, b) => {
                    if x == NIL {
                        continue;
                    }
                    let node = self.n(x);
                    let sl = self.size(node.left) as i64;
                    let ca = a + node.lazy_a as i64;
                    let cb = b + node.lazy_b;
                    stack.push(Step::Enter(node.right, ca, cb + (sl + 1) * ca));
                    stack.push(Step::Emit(x, a, b));
                    stack.push(Step::Enter(node.left, ca, cb));
                }
                Step::Emit(x, a, b) => {
                    let node = self.n(x);
                    let sl = self.size(node.left) as i64;
                    out.push((node.moment + (sl + 1) * a + b, node.timestamp));
                }
            }
        }
        out
    }

    /// The debug dump format used by tests: space-separated
    /// "moment:timestamp" in in-order.
    pub fn dump_string(&self, u: usize) -> String {
        self.dump(u)
            .iter()
            .map(|(m, t)| format!("{}:{}", m, t))
            .collect::<Vec<_>>()
            .join(" ")
    }

    pub fn moments(&self, u: usize) -> Vec<i64> {
        self.dump(u).into_iter().map(|(m, _)| m).collect()
    }
}

/// DeltaSum: sum over children v of delta(v, c_down) in O(1), from the
/// pop-up bookkeeping of `compute_c_down`.
pub fn delta_sum(c_down: i64, child_count: i64, popped: i64) -> i64 {
    c_down * child_count - popped
}
