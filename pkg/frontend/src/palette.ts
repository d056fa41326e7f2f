/** Component palette grouping for the editor sidebar. */

import { ComponentInfo } from "./graph.js";

/** Pipeline-order display sequence; unknown categories sort last. */
export const CATEGORY_ORDER = [
  "input",
  "transform",
  "filter",
  "image_transform",
  "train",
  "evaluate",
  "bless",
  "publish",
  "custom",
] as const;

export interface PaletteGroup {
  category: string;
  components: ComponentInfo[];
}

export function groupByCategory(components: ComponentInfo[]): PaletteGroup[] {
  const byCategory = new Map<string, ComponentInfo[]>();
  for (const c of components) {
    const lst = byCategory.get(c.category) ?? [];
    lst.push(c);
    byCategory.set(c.category, lst);
  }
  const rank = (cat: string): number => {
    const i = (CATEGORY_ORDER as readonly string[]).indexOf(cat);
    return i === -1 ? CATEGORY_ORDER.length : i;
  };
  const cats = [...byCategory.keys()].sort(
    (a, b) => rank(a) - rank(b) || a.localeCompare(b),
  );
  return cats.map((category) => ({
    category,
    components: byCategory
      .get(category)!
      .slice()
      .sort((a, b) => a.name.localeCompare(b.name) || a.id.localeCompare(b.id)),
  }));
}

/** Case-insensitive palette search over id, name, and description. */
export function filterPalette(groups: PaletteGroup[], query: string): PaletteGroup[] {
  const q = query.trim().toLowerCase();
  if (!q) return groups;
  return groups
    .map((g) => ({
      category: g.category,
      components: g.components.filter(
        (c) =>
          c.id.includes(q) ||
          c.name.toLowerCase().includes(q) ||
          (c.description ?? "").toLowerCase().includes(q),
      ),
    }))
    .filter((g) => g.components.length > 0);
}
