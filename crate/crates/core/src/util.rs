//! Small graph and enumeration helpers shared across modules.

/// All words of the given length over letters `0..base`, in
/// lexicographic order.
pub(crate) fn enumerate_words(base: usize, len: usize) -> Vec<Vec<usize>> {
    let mut words: Vec<Vec<usize>> = vec![Vec::new()];
    for _ in 0..len {
        words = words
            .into_iter()
            .flat_map(|w| {
                (0..base).map(move |a| {
                    let mut wa = w.clone();
                    wa.push(a);
                    wa
                })
            })
            .collect();
    }
    words
}

/// Strongly connected components of a directed graph with vertices
/// `0..n`, iteratively (no recursion, the graphs can be large). Components
/// are returned in reverse topological order (every edge leaving a component
/// points to an earlier entry of the result).
pub(crate) fn tarjan_sccs(n: usize, succ: &dyn Fn(usize, &mut Vec<usize>)) -> Vec<Vec<usize>> {
    const UNSEEN: usize = usize::MAX;
    let mut index = vec![UNSEEN; n];
    let mut low = vec![0usize; n];
    let mut on_stack = vec![false; n];
    let mut stack: Vec<usize> = Vec::new();
    let mut next_index = 0usize;
    let mut comps: Vec<Vec<usize>> = Vec::new();
    let mut neigh_buf: Vec<usize> = Vec::new();

    // Explicit DFS frames: (vertex, successors, position).
    let mut frames: Vec<(usize, Vec<usize>, usize)> = Vec::new();
    for root in 0..n {
        if index[root] != UNSEEN {
            continue;
        }
        index[root] = next_index;
        low[root] = next_index;
        next_index += 1;
        stack.push(root);
        on_stack[root] = true;
        neigh_buf.clear();
        succ(root, &mut neigh_buf);
        frames.push((root, std::mem::take(&mut neigh_buf), 0));
        while let Some(frame) = frames.last_mut() {
            let (v, neighbours, pos) = (frame.0, &frame.1, frame.2);
            if pos < neighbours.len() {
                let w = neighbours[pos];
                frame.2 += 1;
                if index[w] == UNSEEN {
                    index[w] = next_index;
                    low[w] = next_index;
                    next_index += 1;
                    stack.push(w);
                    on_stack[w] = true;
                    neigh_buf.clear();
                    succ(w, &mut neigh_buf);
                    frames.push((w, std::mem::take(&mut neigh_buf), 0));
                } else if on_stack[w] {
                    low[v] = low[v].min(index[w]);
                }
            } else {
                frames.pop();
                if let Some(parent) = frames.last_mut() {
                    low[parent.0] = low[parent.0].min(low[v]);
                }
                if low[v] == index[v] {
                    let mut comp = Vec::new();
                    loop {
                        let w = stack.pop().unwrap();
                        on_stack[w] = false;
                        comp.push(w);
                        if w == v {
                            break;
                        }
                    }
                    comps.push(comp);
                }
            }
        }
    }
    comps
}
