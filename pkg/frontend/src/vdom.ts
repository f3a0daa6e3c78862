/** Minimal virtual nodes: plain data out of the view layer, so tests assert
 * on structure without a DOM; the browser entry point materializes them. */

export interface VNode {
  tag: string;
  attrs: Record<string, string>;
  children: Array<VNode | string>;
}

export function h(
  tag: string,
  attrs: Record<string, string> = {},
  ...children: Array<VNode | string | null | undefined>
): VNode {
  return {
    tag,
    attrs,
    children: children.filter((c): c is VNode | string => c != null),
  };
}

/** Depth-first collection of nodes carrying a CSS class. */
export function byClass(root: VNode, className: string): VNode[] {
  const found: VNode[] = [];
  const walk = (node: VNode | string) => {
    if (typeof node === "string") return;
    const classes = (node.attrs.class ?? "").split(/\s+/);
    if (classes.includes(className)) found.push(node);
    node.children.forEach(walk);
  };
  walk(root);
  return found;
}

/** All text inside a node, concatenated in document order. */
export function textOf(node: VNode | string): string {
  if (typeof node === "string") return node;
  return node.children.map(textOf).join("");
}

export function toElement(node: VNode | string, doc: Document): Node {
  if (typeof node === "string") return doc.createTextNode(node);
  const element = doc.createElement(node.tag);
  for (const [name, value] of Object.entries(node.attrs)) {
    if (name === "disabled") {
      if (value !== "") element.setAttribute(name, value);
    } else {
      element.setAttribute(name, value);
    }
  }
  for (const child of node.children) element.appendChild(toElement(child, doc));
  return element;
}
