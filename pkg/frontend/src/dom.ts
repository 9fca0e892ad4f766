// Tiny DOM construction helpers shared by the views.

export function el<K extends keyof HTMLElementTagNameMap>(
  doc: Document,
  tag: K,
  className = "",
  text = "",
): HTMLElementTagNameMap[K] {
  const node = doc.createElement(tag);
  if (className) node.className = className;
  if (text) node.textContent = text;
  return node;
}

export function clear(node: HTMLElement): void {
  while (node.firstChild) node.removeChild(node.firstChild);
}

/** Replace the banner area with one error message; empty string hides it. */
export function setBanner(root: HTMLElement, message: string): void {
  let banner = root.querySelector<HTMLElement>(".error-banner");
  if (!banner) {
    banner = el(root.ownerDocument, "div", "error-banner");
    root.prepend(banner);
  }
  banner.textContent = message;
  banner.style.display = message ? "" : "none";
}
